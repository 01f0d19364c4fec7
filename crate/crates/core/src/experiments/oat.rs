//! How little of the input space a one-factor-at-a-time design explores, and
//! what it misses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::design::{oat_design, radial_design};
use crate::error::{Error, Result};
use crate::estimators::{analyze_radial, AnalysisOptions};
use crate::factors::FactorSet;
use crate::harness::{evaluate, EvaluateOptions, ModelRef};

pub const DEFAULT_MC_POINTS: usize = 1_000_000;

/// Fraction of the unit `k`-cube covered by the inscribed ball of radius 1/2,
/// `pi^(k/2) / (2^k Gamma(k/2 + 1))`.
pub fn oat_volume_ratio(k: usize) -> f64 {
    assert!(k >= 1, "dimension must be at least 1");
    let kf = k as f64;
    std::f64::consts::PI.powf(kf / 2.0) / (2f64.powi(k as i32) * gamma(kf / 2.0 + 1.0))
}

/// Hit-ratio estimate of [`oat_volume_ratio`] and its standard error.
pub fn oat_volume_mc(k: usize, points: usize, seed: u64) -> Result<(f64, f64)> {
    if k == 0 || points == 0 {
        return Err(Error::input(
            "Monte Carlo volume needs k >= 1 and at least one point",
        ));
    }
    const CHUNK: usize = 1 << 14;
    let chunks = points.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(points - c * CHUNK);
            (0..len)
                .filter(|_| {
                    let r2: f64 = (0..k).map(|_| (rng.random::<f64>() - 0.5).powi(2)).sum();
                    r2 <= 0.25
                })
                .count()
        })
        .sum();
    let p = hits as f64 / points as f64;
    Ok((p, (p * (1.0 - p) / points as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OatFactorEffect {
    pub name: String,
    /// `max - min` of the output over the factor's sweep and the nominal point.
    pub oat_effect: f64,
    #[serde(rename = "T_i")]
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OatAuditResult {
    pub k: usize,
    pub volume_ratio: f64,
    pub mc_ratio: f64,
    pub mc_se: f64,
    pub mc_points: usize,
    pub model: String,
    pub levels: usize,
    pub half_width: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub missed_interaction: Vec<OatFactorEffect>,
}

impl OatAuditResult {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["factor", "oat_effect", "T_i"])?;
        for f in &self.missed_interaction {
            w.write_record([
                f.name.clone(),
                f.oat_effect.to_string(),
                f.total.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OatAuditOptions {
    pub levels: usize,
    pub half_width: f64,
    /// Radial base sample size for `T_i`.
    pub n_base: usize,
    pub seed: u64,
    pub mc_points: usize,
    pub evaluate: EvaluateOptions,
}

impl Default for OatAuditOptions {
    fn default() -> Self {
        OatAuditOptions {
            levels: 5,
            half_width: 0.5,
            n_base: 1 << 13,
            seed: 0,
            mc_points: DEFAULT_MC_POINTS,
            evaluate: EvaluateOptions::default(),
        }
    }
}

/// OAT effects around the centre of the cube next to global total effects.
pub fn oat_missed_interaction(
    model: &ModelRef,
    factors: &FactorSet,
    opts: &OatAuditOptions,
) -> Result<OatAuditResult> {
    let k = factors.k();
    let oat = oat_design(factors, opts.levels, opts.half_width)?;
    let oat_batch = evaluate(model, factors, &oat.design, &opts.evaluate)?;
    let y = oat_batch.outputs_by_row();

    let radial = radial_design(factors, opts.n_base, opts.seed)?;
    let batch = evaluate(model, factors, &radial, &opts.evaluate)?;
    let sa = analyze_radial(
        &batch,
        &AnalysisOptions {
            moment_independent: false,
            ..AnalysisOptions::default()
        },
    )?;

    let missed_interaction = (0..k)
        .map(|i| {
            let sweep: Vec<f64> = std::iter::once(0)
                .chain(oat.sweep_rows(i))
                .filter_map(|r| y[r])
                .collect();
            let hi = sweep.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = sweep.iter().copied().fold(f64::INFINITY, f64::min);
            OatFactorEffect {
                name: sa.factors[i].name.clone(),
                oat_effect: if sweep.is_empty() { f64::NAN } else { hi - lo },
                total: sa.factors[i].t,
            }
        })
        .collect();
    let (mc_ratio, mc_se) = oat_volume_mc(k, opts.mc_points, opts.seed)?;
    Ok(OatAuditResult {
        k,
        volume_ratio: oat_volume_ratio(k),
        mc_ratio,
        mc_se,
        mc_points: opts.mc_points,
        model: model.label(),
        levels: opts.levels,
        half_width: opts.half_width,
        n: opts.n_base,
        seed: opts.seed,
        missed_interaction,
    })
}
