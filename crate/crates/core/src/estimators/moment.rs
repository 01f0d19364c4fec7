//! Moment-independent sensitivity from Kolmogorov-Smirnov distances.
//!
//! Rows are split into equal-count bins by the rank of `X_i`. Within each
//! bin the conditional output ECDF is compared with the unconditional one;
//! the per-bin distances are then aggregated (maximum by default, median on
//! request). The result lies in `[0, 1]` and is zero when `Y` does not depend
//! on `X_i` in distribution.

use serde::{Deserialize, Serialize};

use crate::design::{DesignKind, RowTag};
use crate::error::{Error, Result};
use crate::harness::EvaluationBatch;

/// Minimum rows per conditioning bin.
pub const MIN_ROWS_PER_BIN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KsAggregate {
    #[default]
    Max,
    Median,
}

/// `ceil(sqrt(n) / 8)` clamped to `[8, 64]`.
pub fn default_bins(n: usize) -> usize {
    ((n as f64).sqrt() / 8.0).ceil().clamp(8.0, 64.0) as usize
}

/// Two-sample Kolmogorov-Smirnov statistic of two sorted samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Row-major factor values with their outputs, the input to the KS estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainSample {
    pub k: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PlainSample {
    pub fn new(k: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if k == 0 || x.len() != y.len() * k {
            return Err(Error::input("factor matrix does not match output length"));
        }
        Ok(PlainSample { k, x, y })
    }

    /// Independent rows of a batch: all rows of a plain design, or the `A` and
    /// `B` blocks of a radial one.
    pub fn from_batch(batch: &EvaluationBatch) -> Result<Self> {
        let design = batch.design();
        let keep = |tag: RowTag| match design.kind {
            DesignKind::Plain => true,
            DesignKind::Radial => matches!(tag, RowTag::A(_) | RowTag::B(_)),
            DesignKind::Oat => false,
        };
        if design.kind == DesignKind::Oat {
            return Err(Error::input(
                "moment-independent indices need a random design, not OAT",
            ));
        }
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (&row, &v) in batch.kept_rows().iter().zip(batch.y()) {
            if keep(design.tag(row)) {
                x.extend_from_slice(batch.x_row(row));
                y.push(v);
            }
        }
        PlainSample::new(design.k, x, y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Sub-sample on the listed rows (repeats allowed).
    pub fn select(&self, rows: &[usize]) -> PlainSample {
        let mut x = Vec::with_capacity(rows.len() * self.k);
        for &r in rows {
            x.extend_from_slice(&self.x[r * self.k..(r + 1) * self.k]);
        }
        PlainSample {
            k: self.k,
            x,
            y: rows.iter().map(|&r| self.y[r]).collect(),
        }
    }

    pub fn indices(&self, bins: usize, aggregate: KsAggregate) -> Result<Vec<f64>> {
        let n = self.len();
        if bins == 0 {
            return Err(Error::input("bin count must be positive"));
        }
        if n < bins * MIN_ROWS_PER_BIN {
            return Err(Error::InsufficientData(format!(
                "{n} rows for {bins} bins; need at least {}",
                bins * MIN_ROWS_PER_BIN
            )));
        }
        let mut sorted_y = self.y.clone();
        sorted_y.sort_by(f64::total_cmp);

        let mut out = Vec::with_capacity(self.k);
        let mut order: Vec<usize> = (0..n).collect();
        let mut conditional = Vec::with_capacity(n / bins + 1);
        for i in 0..self.k {
            order.sort_by(|&p, &q| {
                self.x[p * self.k + i]
                    .total_cmp(&self.x[q * self.k + i])
                    .then(p.cmp(&q))
            });
            let mut distances = Vec::with_capacity(bins);
            for b in 0..bins {
                let (lo, hi) = (b * n / bins, (b + 1) * n / bins);
                conditional.clear();
                conditional.extend(order[lo..hi].iter().map(|&r| self.y[r]));
                conditional.sort_by(f64::total_cmp);
                distances.push(ks_distance(&conditional, &sorted_y));
            }
            out.push(aggregate_distances(&mut distances, aggregate));
        }
        Ok(out)
    }
}

fn aggregate_distances(d: &mut [f64], how: KsAggregate) -> f64 {
    match how {
        KsAggregate::Max => d.iter().copied().fold(0.0, f64::max),
        KsAggregate::Median => {
            d.sort_by(f64::total_cmp);
            let m = d.len();
            if m % 2 == 1 {
                d[m / 2]
            } else {
                0.5 * (d[m / 2 - 1] + d[m / 2])
            }
        }
    }
}

/// KS-based indices `d_i` for a plain (or radial, via its `A`/`B` rows) batch.
pub fn moment_independent_indices(
    batch: &EvaluationBatch,
    bins: usize,
    aggregate: KsAggregate,
) -> Result<Vec<f64>> {
    PlainSample::from_batch(batch)?.indices(bins, aggregate)
}
