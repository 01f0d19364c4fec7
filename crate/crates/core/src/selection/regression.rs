//! Least-squares fits of column subsets and the fit criteria scored on them.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Goodness-of-fit score used as the meta-model output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Bic,
    Aic,
    AdjustedR2,
    /// Leave-one-out mean squared prediction error (closed form via leverages).
    CvMse,
}

impl Criterion {
    pub fn higher_is_better(self) -> bool {
        matches!(self, Criterion::AdjustedR2)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Criterion::Bic => "bic",
            Criterion::Aic => "aic",
            Criterion::AdjustedR2 => "adjusted_r2",
            Criterion::CvMse => "cv_mse",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bic" => Criterion::Bic,
            "aic" => Criterion::Aic,
            "adjusted_r2" => Criterion::AdjustedR2,
            "cv_mse" => Criterion::CvMse,
            other => {
                return Err(Error::input(format!(
                    "unknown criterion '{other}' (expected bic, aic, adjusted_r2 or cv_mse)"
                )))
            }
        })
    }
}

/// Score of the regression of `y` on an intercept plus `cols` of `x`, or
/// `None` when that design is rank deficient (or leaves no residual degrees
/// of freedom).
///
/// The residual sum of squares is floored at `EPSILON * TSS`, so an exact fit
/// still yields a finite log-likelihood criterion.
pub fn subset_criterion(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cols: &[usize],
    criterion: Criterion,
) -> Option<f64> {
    let n = x.nrows();
    let d = cols.len() + 1;
    if n <= d {
        return None;
    }
    let design = DMatrix::from_fn(n, d, |r, c| if c == 0 { 1.0 } else { x[(r, cols[c - 1])] });
    let svd = design.svd(true, false);
    let sigma = &svd.singular_values;
    let tol = sigma.max() * n.max(d) as f64 * f64::EPSILON;
    if sigma.iter().any(|&s| s <= tol) {
        return None;
    }
    let u = svd.u.as_ref()?;
    let fitted = u * (u.transpose() * y);
    let resid = y - &fitted;

    let nf = n as f64;
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let rss = resid.norm_squared().max(f64::EPSILON * tss);

    Some(match criterion {
        Criterion::Bic => nf * (rss / nf).ln() + d as f64 * nf.ln(),
        Criterion::Aic => nf * (rss / nf).ln() + 2.0 * d as f64,
        Criterion::AdjustedR2 => 1.0 - (rss / (n - d) as f64) / (tss / (nf - 1.0)),
        Criterion::CvMse => {
            let mut press = 0.0;
            for r in 0..n {
                let h: f64 = u.row(r).iter().map(|v| v * v).sum();
                if h >= 1.0 - 1e-10 {
                    return None;
                }
                press += (resid[r] / (1.0 - h)).powi(2);
            }
            press / nf
        }
    })
}
