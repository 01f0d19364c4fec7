//! Analytic test functions with known sensitivity structure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sin x1 + a sin^2 x2 + b x3^4 sin x1`.
pub fn ishigami(x: &[f64], a: f64, b: f64) -> f64 {
    let s1 = x[0].sin();
    let s2 = x[1].sin();
    s1 + a * s2 * s2 + b * x[2].powi(4) * s1
}

/// Sobol' G-function, `prod_i (|4 x_i - 2| + a_i) / (1 + a_i)`.
pub fn sobol_g(x: &[f64], a: &[f64]) -> f64 {
    x.iter()
        .zip(a)
        .map(|(&xi, &ai)| ((4.0 * xi - 2.0).abs() + ai) / (1.0 + ai))
        .product()
}

pub fn linear_additive(x: &[f64], weights: &[f64]) -> f64 {
    x.iter().zip(weights).map(|(xi, wi)| xi * wi).sum()
}

/// Product of all inputs; with two centred factors the output has no main effects.
pub fn pure_interaction(x: &[f64]) -> f64 {
    x.iter().product()
}

/// The same univariate polynomial applied to each factor and summed:
/// `sum_i sum_m c_m x_i^m`. With one factor this is the plain polynomial.
pub fn polynomial(x: &[f64], coefficients: &[f64]) -> f64 {
    x.iter()
        .map(|&xi| coefficients.iter().rev().fold(0.0, |acc, c| acc * xi + c))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BuiltinModel {
    Ishigami { a: f64, b: f64 },
    SobolG { a: Vec<f64> },
    LinearAdditive { weights: Vec<f64> },
    PureInteraction,
    Polynomial { coefficients: Vec<f64> },
}

impl BuiltinModel {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinModel::Ishigami { .. } => "ishigami",
            BuiltinModel::SobolG { .. } => "sobol_g",
            BuiltinModel::LinearAdditive { .. } => "linear_additive",
            BuiltinModel::PureInteraction => "pure_interaction",
            BuiltinModel::Polynomial { .. } => "polynomial",
        }
    }

    /// Checks constants and the factor count the function expects.
    pub fn validate(&self, k: usize) -> Result<()> {
        let need = |expected: usize, what: &str| {
            if expected == k {
                Ok(())
            } else {
                Err(Error::input(format!(
                    "{} expects {expected} {what} for {k} factors",
                    self.name()
                )))
            }
        };
        match self {
            BuiltinModel::Ishigami { a, b } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::input("ishigami constants must be finite"));
                }
                need(3, "factors")
            }
            BuiltinModel::SobolG { a } => {
                if a.iter().any(|ai| !(ai.is_finite() && *ai >= 0.0)) {
                    return Err(Error::input("sobol_g coefficients must be finite and >= 0"));
                }
                need(a.len(), "coefficients")
            }
            BuiltinModel::LinearAdditive { weights } => {
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::input("linear_additive weights must be finite"));
                }
                need(weights.len(), "weights")
            }
            BuiltinModel::PureInteraction => {
                if k < 2 {
                    return Err(Error::input("pure_interaction needs at least 2 factors"));
                }
                Ok(())
            }
            BuiltinModel::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::input("polynomial needs finite coefficients"));
                }
                Ok(())
            }
        }
    }

    pub fn evaluate_point(&self, x: &[f64]) -> f64 {
        match self {
            BuiltinModel::Ishigami { a, b } => ishigami(x, *a, *b),
            BuiltinModel::SobolG { a } => sobol_g(x, a),
            BuiltinModel::LinearAdditive { weights } => linear_additive(x, weights),
            BuiltinModel::PureInteraction => pure_interaction(x),
            BuiltinModel::Polynomial { coefficients } => polynomial(x, coefficients),
        }
    }
}
