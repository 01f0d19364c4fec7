//! Grouped permutation importance: `T_i` of the prediction loss over the cube
//! of "column shuffled or intact" choices, next to the classic one-column
//! permutation importance.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{meta_indices, SelectionMode};
use crate::error::{Error, Result};

pub const MIN_PERMUTATION_BASE: usize = 64;

/// A fitted black-box regressor.
pub trait Predictor: Sync {
    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>>;
}

impl<F> Predictor for F
where
    F: Fn(&DMatrix<f64>) -> Vec<f64> + Sync,
{
    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationOptions {
    pub mode: SelectionMode,
    /// Base sample size for [`SelectionMode::Sampled`]; at least
    /// [`MIN_PERMUTATION_BASE`].
    pub n_base: usize,
    /// Seeds both the column shuffles and, when sampled, the design.
    pub seed: u64,
}

impl Default for PermutationOptions {
    fn default() -> Self {
        PermutationOptions {
            mode: SelectionMode::Exhaustive,
            n_base: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    #[serde(rename = "S_i")]
    pub first_order: f64,
    #[serde(rename = "T_i")]
    pub total: f64,
    /// Loss increase from shuffling this column alone.
    pub oat: f64,
    /// `oat^2` as a share of the sum over features; equals `T_i` when the
    /// loss is additive in the shuffle choices.
    pub oat_share: f64,
    /// `T_i - oat_share`: positive when single shuffles understate the joint effect.
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationImportance {
    pub features: Vec<FeatureImportance>,
    /// Mean squared error with every column intact.
    pub baseline_loss: f64,
    pub mode: SelectionMode,
    pub evaluations: usize,
    pub seed: u64,
    pub n_base: Option<usize>,
}

impl PermutationImportance {
    pub fn total(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.total).collect()
    }

    pub fn contrast(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.contrast).collect()
    }
}

/// One seeded shuffle per column, drawn in column order from a single stream.
fn column_permutations(n: usize, p: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p)
        .map(|_| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect()
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter()
        .zip(y)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / y.len() as f64
}

pub fn group_permutation_importance<P: Predictor + ?Sized>(
    predictor: &P,
    names: &[String],
    x: &DMatrix<f64>,
    y: &[f64],
    opts: &PermutationOptions,
) -> Result<PermutationImportance> {
    let (n, p) = x.shape();
    if names.len() != p || y.len() != n || n < 2 || p == 0 {
        return Err(Error::input(format!(
            "permutation importance needs matching shapes: {n}x{p} data, {} names, {} responses",
            names.len(),
            y.len()
        )));
    }
    if opts.mode == SelectionMode::Sampled && opts.n_base < MIN_PERMUTATION_BASE {
        return Err(Error::input(format!(
            "sampled permutation importance needs N >= {MIN_PERMUTATION_BASE}, got {}",
            opts.n_base
        )));
    }
    let perms = column_permutations(n, p, opts.seed);

    let loss = |mask: u64| -> Result<Option<f64>> {
        let mut xp = x.clone();
        for (i, perm) in perms.iter().enumerate() {
            if mask >> i & 1 == 1 {
                for (r, &src) in perm.iter().enumerate() {
                    xp[(r, i)] = x[(src, i)];
                }
            }
        }
        let pred = predictor.predict(&xp)?;
        if pred.len() != n {
            return Err(Error::RowCountMismatch {
                expected: n,
                got: pred.len(),
            });
        }
        let value = mse(&pred, y);
        if !value.is_finite() {
            return Err(Error::ModelFailure {
                message: format!("non-finite prediction loss with shuffle mask {mask:#b}"),
                failures: Vec::new(),
            });
        }
        Ok(Some(value))
    };

    let singles: Vec<u64> = std::iter::once(0)
        .chain((0..p).map(|i| 1u64 << i))
        .collect();
    let outcome = meta_indices(p, opts.mode, opts.n_base, opts.seed, &singles, true, loss)?;

    let baseline = outcome.values[&0];
    let oat: Vec<f64> = (0..p)
        .map(|i| outcome.values[&(1u64 << i)] - baseline)
        .collect();
    let oat_norm: f64 = oat.iter().map(|v| v * v).sum();
    let features = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let share = if oat_norm > 0.0 {
                oat[i] * oat[i] / oat_norm
            } else {
                0.0
            };
            FeatureImportance {
                name: name.clone(),
                first_order: outcome.first_order[i],
                total: outcome.total[i],
                oat: oat[i],
                oat_share: share,
                contrast: outcome.total[i] - share,
            }
        })
        .collect();
    let sampled = opts.mode == SelectionMode::Sampled;
    Ok(PermutationImportance {
        features,
        baseline_loss: baseline,
        mode: opts.mode,
        evaluations: outcome.values.len(),
        seed: opts.seed,
        n_base: sampled.then_some(opts.n_base),
    })
}
