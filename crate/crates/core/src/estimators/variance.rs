//! First-order and total-effect indices from a radial design.
//!
//! With `f_A`, `f_B`, `f_AB^i` the outputs of the three blocks and `m`, `V`
//! the mean and variance of the pooled `{f_A, f_B}` sample:
//!
//! ```text
//! V_i  = 1/N     sum_j (f_B[j] - m) (f_AB^i[j] - f_A[j])      S_i = V_i  / V
//! VT_i = 1/(2N)  sum_j (f_A[j] - f_AB^i[j])^2                  T_i = VT_i / V
//! ```
//!
//! `V_i` estimates `V(E(Y | X_i))`; `VT_i` estimates `E(V(Y | X_~i))`.
//! Centring `f_B` makes both ratios invariant under `y -> a y + b`.

use crate::design::{DesignKind, RowTag};
use crate::error::{Error, Result};
use crate::harness::EvaluationBatch;

/// Outputs of a radial design grouped by block, restricted to complete blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSample {
    k: usize,
    fa: Vec<f64>,
    fb: Vec<f64>,
    /// Factor-major: `fab[i * n + j]`.
    fab: Vec<f64>,
    /// Base samples skipped because one of their rows failed.
    pub dropped_blocks: usize,
}

/// Point estimates over one set of base samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialEstimate {
    pub first_order: Vec<f64>,
    pub total: Vec<f64>,
    pub variance: f64,
}

impl RadialSample {
    pub fn from_blocks(fa: Vec<f64>, fb: Vec<f64>, fab: Vec<Vec<f64>>) -> Result<Self> {
        let n = fa.len();
        if n < 2 || fb.len() != n || fab.is_empty() || fab.iter().any(|c| c.len() != n) {
            return Err(Error::input(
                "radial blocks need N >= 2 rows each and one A_B block per factor",
            ));
        }
        Ok(RadialSample {
            k: fab.len(),
            fa,
            fb,
            fab: fab.concat(),
            dropped_blocks: 0,
        })
    }

    pub fn from_batch(batch: &EvaluationBatch) -> Result<Self> {
        let design = batch.design();
        if design.kind != DesignKind::Radial {
            return Err(Error::input("variance-based indices need a radial design"));
        }
        let (n, k) = (design.n_base, design.k);
        let by_row = batch.outputs_by_row();
        let at = |tag| by_row[design.radial_index(tag).expect("radial tag in range")];

        let mut fa = Vec::with_capacity(n);
        let mut fb = Vec::with_capacity(n);
        let mut fab = vec![Vec::with_capacity(n); k];
        let mut dropped = 0;
        for j in 0..n {
            let a = at(RowTag::A(j));
            let b = at(RowTag::B(j));
            let ab: Vec<Option<f64>> = (0..k)
                .map(|i| {
                    at(RowTag::AB {
                        factor: i,
                        sample: j,
                    })
                })
                .collect();
            match (a, b, ab.iter().all(Option::is_some)) {
                (Some(a), Some(b), true) => {
                    fa.push(a);
                    fb.push(b);
                    for (col, v) in fab.iter_mut().zip(ab) {
                        col.push(v.expect("checked"));
                    }
                }
                _ => dropped += 1,
            }
        }
        if fa.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "only {} complete radial blocks remain",
                fa.len()
            )));
        }
        let mut sample = RadialSample::from_blocks(fa, fb, fab)?;
        sample.dropped_blocks = dropped;
        Ok(sample)
    }

    pub fn n(&self) -> usize {
        self.fa.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Estimates over all base samples.
    pub fn estimate(&self) -> Result<RadialEstimate> {
        let all: Vec<usize> = (0..self.n()).collect();
        self.estimate_on(&all)
    }

    /// Estimates over the base samples listed in `idx` (repeats allowed).
    pub fn estimate_on(&self, idx: &[usize]) -> Result<RadialEstimate> {
        let n = idx.len() as f64;
        let mean = idx.iter().map(|&j| self.fa[j] + self.fb[j]).sum::<f64>() / (2.0 * n);
        let variance = idx
            .iter()
            .map(|&j| (self.fa[j] - mean).powi(2) + (self.fb[j] - mean).powi(2))
            .sum::<f64>()
            / (2.0 * n - 1.0);
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::DegenerateOutput(format!(
                "total output variance is {variance}"
            )));
        }

        let size = self.n();
        let mut first_order = Vec::with_capacity(self.k);
        let mut total = Vec::with_capacity(self.k);
        for i in 0..self.k {
            let ab = &self.fab[i * size..(i + 1) * size];
            let (mut vi, mut vt) = (0.0, 0.0);
            for &j in idx {
                let delta = ab[j] - self.fa[j];
                vi += (self.fb[j] - mean) * delta;
                vt += delta * delta;
            }
            first_order.push(vi / n / variance);
            total.push(vt / (2.0 * n) / variance);
        }
        Ok(RadialEstimate {
            first_order,
            total,
            variance,
        })
    }
}

/// First-order indices `S_i` from a radial batch.
pub fn first_order_indices(batch: &EvaluationBatch) -> Result<Vec<f64>> {
    Ok(RadialSample::from_batch(batch)?.estimate()?.first_order)
}

/// Total-effect indices `T_i` from a radial batch.
pub fn total_indices(batch: &EvaluationBatch) -> Result<Vec<f64>> {
    Ok(RadialSample::from_batch(batch)?.estimate()?.total)
}
