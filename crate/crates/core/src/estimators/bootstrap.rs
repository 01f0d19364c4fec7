//! Percentile bootstrap intervals.
//!
//! Radial statistics resample whole base samples `j` (the rows `A(j)`, `B(j)`
//! and every `AB(., j)` move together); KS statistics resample rows of the
//! plain sample. Resample `r` draws from its own generator seeded with
//! `seed + r`, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::moment::{KsAggregate, PlainSample};
use super::uncertainty::quantile_sorted;
use super::variance::RadialSample;
use crate::design::DesignKind;
use crate::error::{Error, Result};
use crate::harness::EvaluationBatch;

pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples < MIN_RESAMPLES {
            return Err(Error::input(format!(
                "bootstrap needs at least {MIN_RESAMPLES} resamples, got {}",
                self.resamples
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::input(format!(
                "confidence level {} outside (0, 1)",
                self.level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistic {
    S,
    T,
    D,
}

fn resample_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Percentile interval per column of `draws` (one row per resample), widened
/// if needed so that it brackets `point`.
fn percentile_intervals(draws: &[Vec<f64>], point: &[f64], level: f64) -> Vec<Interval> {
    let tail = 0.5 * (1.0 - level);
    (0..point.len())
        .map(|i| {
            let mut col: Vec<f64> = draws.iter().map(|d| d[i]).collect();
            col.sort_by(f64::total_cmp);
            Interval {
                lo: quantile_sorted(&col, tail).min(point[i]),
                hi: quantile_sorted(&col, 1.0 - tail).max(point[i]),
                level,
            }
        })
        .collect()
}

/// First-order and total-effect intervals from one set of resamples.
pub fn radial_intervals(
    sample: &RadialSample,
    cfg: &BootstrapConfig,
) -> Result<(Vec<Interval>, Vec<Interval>)> {
    cfg.validate()?;
    let point = sample.estimate()?;
    let n = sample.n();
    let draws: Vec<_> = (0..cfg.resamples)
        .into_par_iter()
        .filter_map(|r| {
            let idx = resample_indices(n, cfg.seed.wrapping_add(r as u64));
            // A resample can be constant even when the full sample is not.
            sample.estimate_on(&idx).ok()
        })
        .collect();
    if draws.len() < cfg.resamples / 2 {
        return Err(Error::DegenerateOutput(
            "most bootstrap resamples have zero output variance".into(),
        ));
    }
    let s: Vec<Vec<f64>> = draws.iter().map(|d| d.first_order.clone()).collect();
    let t: Vec<Vec<f64>> = draws.iter().map(|d| d.total.clone()).collect();
    Ok((
        percentile_intervals(&s, &point.first_order, cfg.level),
        percentile_intervals(&t, &point.total, cfg.level),
    ))
}

pub fn ks_intervals(
    sample: &PlainSample,
    bins: usize,
    aggregate: KsAggregate,
    cfg: &BootstrapConfig,
) -> Result<Vec<Interval>> {
    cfg.validate()?;
    let point = sample.indices(bins, aggregate)?;
    let n = sample.len();
    let draws = (0..cfg.resamples)
        .into_par_iter()
        .map(|r| {
            let idx = resample_indices(n, cfg.seed.wrapping_add(r as u64));
            sample.select(&idx).indices(bins, aggregate)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(percentile_intervals(&draws, &point, cfg.level))
}

/// Per-factor bootstrap interval of one statistic.
pub fn bootstrap_ci(
    batch: &EvaluationBatch,
    statistic: Statistic,
    cfg: &BootstrapConfig,
    bins: Option<usize>,
) -> Result<Vec<Interval>> {
    match statistic {
        Statistic::S | Statistic::T => {
            if batch.design().kind != DesignKind::Radial {
                return Err(Error::input("S and T intervals need a radial design"));
            }
            let (s, t) = radial_intervals(&RadialSample::from_batch(batch)?, cfg)?;
            Ok(if statistic == Statistic::S { s } else { t })
        }
        Statistic::D => {
            let sample = PlainSample::from_batch(batch)?;
            let bins = bins.unwrap_or_else(|| super::moment::default_bins(sample.len()));
            ks_intervals(&sample, bins, KsAggregate::default(), cfg)
        }
    }
}
