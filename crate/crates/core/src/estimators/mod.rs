//! Statistical treatment of evaluation batches.

mod bootstrap;
mod moment;
mod uncertainty;
mod variance;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::EvaluationBatch;

pub use bootstrap::{
    bootstrap_ci, ks_intervals, radial_intervals, BootstrapConfig, Interval, Statistic,
    MIN_RESAMPLES,
};
pub use moment::{
    default_bins, ks_distance, moment_independent_indices, KsAggregate, PlainSample,
    MIN_ROWS_PER_BIN,
};
pub use uncertainty::{
    quantile_sorted, uncertainty_analysis, uncertainty_from_values, Quantile, UncertaintyResult,
    UA_LEVELS,
};
pub use variance::{first_order_indices, total_indices, RadialEstimate, RadialSample};

/// Identifies the estimator formulas behind a [`SensitivityResult`].
pub const ESTIMATOR_VERSION: &str =
    "radial/1: S=centred-B paired product, T=half mean squared difference, d=binned KS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorIndices {
    pub name: String,
    #[serde(rename = "S_i")]
    pub s: f64,
    #[serde(rename = "T_i")]
    pub t: f64,
    #[serde(rename = "d_i")]
    pub d: Option<f64>,
    #[serde(rename = "S_ci")]
    pub s_ci: Option<Interval>,
    #[serde(rename = "T_ci")]
    pub t_ci: Option<Interval>,
    #[serde(rename = "d_ci")]
    pub d_ci: Option<Interval>,
    pub s_negative: bool,
    pub t_negative: bool,
}

impl FactorIndices {
    /// Little or no first-order effect but a clear total effect.
    pub fn interaction_only(&self) -> bool {
        self.s.abs() < 0.05 && self.t - self.s > 0.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Sum of first-order estimates, unclamped.
    #[serde(rename = "sum_S")]
    pub sum_s: f64,
    /// Names of factors with a negative `S_i` or `T_i` estimate.
    pub negative_estimates: Vec<String>,
    /// Largest bootstrap half-width over all `S_i`, `T_i`; `None` without bootstrap.
    pub noise: Option<f64>,
    /// `sum_S <= 1 + 3 noise` and `S_i <= T_i + 3 noise` for every factor.
    pub closure_ok: Option<bool>,
    pub dropped_blocks: usize,
    pub notes: Vec<String>,
}

/// Per-factor indices and run metadata; serialized as `sa.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    #[serde(default)]
    pub study_id: String,
    pub factors: Vec<FactorIndices>,
    pub diagnostics: Diagnostics,
    #[serde(rename = "V_hat")]
    pub v_hat: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub bootstrap: Option<BootstrapConfig>,
    pub bins: Option<usize>,
    pub estimator_version: String,
}

impl SensitivityResult {
    pub fn first_order(&self) -> Vec<f64> {
        self.factors.iter().map(|f| f.s).collect()
    }

    pub fn total(&self) -> Vec<f64> {
        self.factors.iter().map(|f| f.t).collect()
    }

    /// One CSV row per factor.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record([
            "factor",
            "S_i",
            "S_lo",
            "S_hi",
            "T_i",
            "T_lo",
            "T_hi",
            "d_i",
            "d_lo",
            "d_hi",
            "s_negative",
            "t_negative",
        ])?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for f in &self.factors {
            w.write_record([
                f.name.clone(),
                f.s.to_string(),
                opt(f.s_ci.map(|c| c.lo)),
                opt(f.s_ci.map(|c| c.hi)),
                f.t.to_string(),
                opt(f.t_ci.map(|c| c.lo)),
                opt(f.t_ci.map(|c| c.hi)),
                opt(f.d),
                opt(f.d_ci.map(|c| c.lo)),
                opt(f.d_ci.map(|c| c.hi)),
                f.s_negative.to_string(),
                f.t_negative.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub bootstrap: Option<BootstrapConfig>,
    /// KS bins; `None` uses [`default_bins`].
    pub bins: Option<usize>,
    pub aggregate: KsAggregate,
    pub moment_independent: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            bootstrap: None,
            bins: None,
            aggregate: KsAggregate::Max,
            moment_independent: true,
        }
    }
}

/// Full sensitivity analysis of a radial batch.
pub fn analyze_radial(
    batch: &EvaluationBatch,
    opts: &AnalysisOptions,
) -> Result<SensitivityResult> {
    let sample = RadialSample::from_batch(batch)?;
    let point = sample.estimate()?;
    let names = batch.factor_names();
    let k = sample.k();

    let (s_ci, t_ci) = match &opts.bootstrap {
        Some(cfg) => {
            let (s, t) = radial_intervals(&sample, cfg)?;
            (Some(s), Some(t))
        }
        None => (None, None),
    };

    let mut notes = Vec::new();
    let mut d = None;
    let mut d_ci = None;
    let mut bins_used = None;
    if opts.moment_independent {
        let plain = PlainSample::from_batch(batch)?;
        let bins = opts.bins.unwrap_or_else(|| default_bins(plain.len()));
        match plain.indices(bins, opts.aggregate) {
            Ok(values) => {
                bins_used = Some(bins);
                if let Some(cfg) = &opts.bootstrap {
                    d_ci = Some(ks_intervals(&plain, bins, opts.aggregate, cfg)?);
                }
                d = Some(values);
            }
            Err(Error::InsufficientData(msg)) => {
                notes.push(format!("moment-independent indices skipped: {msg}"))
            }
            Err(e) => return Err(e),
        }
    }

    let factors: Vec<FactorIndices> = (0..k)
        .map(|i| FactorIndices {
            name: names[i].clone(),
            s: point.first_order[i],
            t: point.total[i],
            d: d.as_ref().map(|v| v[i]),
            s_ci: s_ci.as_ref().map(|v| v[i]),
            t_ci: t_ci.as_ref().map(|v| v[i]),
            d_ci: d_ci.as_ref().map(|v: &Vec<Interval>| v[i]),
            s_negative: point.first_order[i] < 0.0,
            t_negative: point.total[i] < 0.0,
        })
        .collect();

    let sum_s: f64 = point.first_order.iter().sum();
    let noise = match (&s_ci, &t_ci) {
        (Some(s), Some(t)) => Some(
            s.iter()
                .chain(t)
                .map(Interval::half_width)
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    let closure_ok = noise.map(|noise| {
        sum_s <= 1.0 + 3.0 * noise && factors.iter().all(|f| f.s <= f.t + 3.0 * noise)
    });
    if closure_ok == Some(false) {
        notes.push(
            "estimates violate sum_S <= 1 or S_i <= T_i beyond bootstrap noise; increase N".into(),
        );
    }
    for f in &factors {
        if f.interaction_only() {
            notes.push(format!(
                "{}: factor active only through interactions",
                f.name
            ));
        }
    }

    Ok(SensitivityResult {
        study_id: String::new(),
        diagnostics: Diagnostics {
            sum_s,
            negative_estimates: factors
                .iter()
                .filter(|f| f.s_negative || f.t_negative)
                .map(|f| f.name.clone())
                .collect(),
            noise,
            closure_ok,
            dropped_blocks: sample.dropped_blocks,
            notes,
        },
        factors,
        v_hat: point.variance,
        n: sample.n(),
        k,
        seed: batch.design().seed,
        bootstrap: opts.bootstrap,
        bins: bins_used,
        estimator_version: ESTIMATOR_VERSION.to_string(),
    })
}
