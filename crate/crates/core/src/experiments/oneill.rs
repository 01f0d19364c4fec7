//! Error of polynomial fits against model order: systematic error falls with
//! order while the error propagated from estimated coefficients rises.
//!
//! Each replication observes the true polynomial plus Gaussian noise at
//! `n_obs` fixed equispaced points of `[-1, 1]` and fits every order in the
//! grid by least squares on a Legendre basis. Predictions are compared with
//! the truth on a finer equispaced evaluation grid:
//!
//! ```text
//! bias2    = mean_x ( mean_r yhat_r(x) - f(x) )^2
//! var_prop = mean_x   mean_r ( yhat_r(x) - mean_r yhat_r(x) )^2
//! ```
//!
//! so `bias2 + var_prop` is the mean squared prediction error.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition numbers above this are reported as warnings.
pub const CONDITION_WARNING: f64 = 1e8;
/// Orders within this distance of the minimum total error tie; the smallest wins.
pub const ARGMIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneillSetup {
    /// Power-basis coefficients of the true function, constant term first.
    pub coefficients: Vec<f64>,
    pub noise_sd: f64,
    pub n_obs: usize,
    pub orders: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub eval_points: usize,
}

impl Default for OneillSetup {
    fn default() -> Self {
        OneillSetup {
            coefficients: vec![1.0, 1.0, -2.0, 1.5],
            noise_sd: 0.2,
            n_obs: 30,
            orders: (0..=10).collect(),
            replications: 500,
            seed: 0,
            eval_points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityCurve {
    pub orders: Vec<usize>,
    pub bias2: Vec<f64>,
    pub var_prop: Vec<f64>,
    pub total: Vec<f64>,
    /// Condition number of each order's observation design.
    pub condition: Vec<f64>,
    pub argmin_order: usize,
    /// The minimum lies strictly inside the order grid.
    pub interior_minimum: bool,
    pub warnings: Vec<String>,
    pub setup: OneillSetup,
}

impl ComplexityCurve {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["order", "bias2", "var_prop", "total", "condition"])?;
        for i in 0..self.orders.len() {
            w.write_record([
                self.orders[i].to_string(),
                self.bias2[i].to_string(),
                self.var_prop[i].to_string(),
                self.total[i].to_string(),
                self.condition[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn equispaced(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|j| -1.0 + 2.0 * j as f64 / (n - 1) as f64)
        .collect()
}

/// Legendre polynomials `P_0..=P_order` at each point, one row per point.
fn legendre_basis(x: &[f64], order: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(x.len(), order + 1);
    for (r, &t) in x.iter().enumerate() {
        m[(r, 0)] = 1.0;
        if order >= 1 {
            m[(r, 1)] = t;
        }
        for n in 1..order {
            let nf = n as f64;
            m[(r, n + 1)] = ((2.0 * nf + 1.0) * t * m[(r, n)] - nf * m[(r, n - 1)]) / (nf + 1.0);
        }
    }
    m
}

fn validate(setup: &OneillSetup) -> Result<()> {
    if setup.coefficients.is_empty() || setup.coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::input(
            "true polynomial needs at least one finite coefficient",
        ));
    }
    if !(setup.noise_sd >= 0.0 && setup.noise_sd.is_finite()) {
        return Err(Error::input(format!(
            "noise sd {} must be finite and >= 0",
            setup.noise_sd
        )));
    }
    if setup.orders.is_empty() || setup.orders.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input(
            "order grid must be non-empty and strictly increasing",
        ));
    }
    let max = *setup.orders.last().expect("non-empty");
    if max + 1 >= setup.n_obs {
        return Err(Error::input(format!(
            "largest order {max} needs n_obs > {}, got {}",
            max + 1,
            setup.n_obs
        )));
    }
    if setup.replications == 0 || setup.eval_points < 2 {
        return Err(Error::input(
            "need at least one replication and two evaluation points",
        ));
    }
    Ok(())
}

pub fn oneill_curve(setup: &OneillSetup) -> Result<ComplexityCurve> {
    validate(setup)?;
    let x_obs = equispaced(setup.n_obs);
    let x_eval = equispaced(setup.eval_points);
    let f_obs: Vec<f64> = x_obs
        .iter()
        .map(|&x| horner(&setup.coefficients, x))
        .collect();
    let f_eval: Vec<f64> = x_eval
        .iter()
        .map(|&x| horner(&setup.coefficients, x))
        .collect();

    let noise = Normal::new(0.0, setup.noise_sd).map_err(|e| Error::input(e.to_string()))?;
    let columns: Vec<Vec<f64>> = (0..setup.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
            rng.set_stream(r as u64);
            f_obs.iter().map(|f| f + noise.sample(&mut rng)).collect()
        })
        .collect();
    let observations = DMatrix::from_fn(setup.n_obs, setup.replications, |i, r| columns[r][i]);

    let reps = setup.replications as f64;
    let n_eval = setup.eval_points as f64;
    let mut curve = ComplexityCurve {
        orders: setup.orders.clone(),
        bias2: Vec::new(),
        var_prop: Vec::new(),
        total: Vec::new(),
        condition: Vec::new(),
        argmin_order: 0,
        interior_minimum: false,
        warnings: Vec::new(),
        setup: setup.clone(),
    };
    for &order in &setup.orders {
        let design = legendre_basis(&x_obs, order);
        let svd = design.svd(true, true);
        let (s_max, s_min) = (svd.singular_values.max(), svd.singular_values.min());
        let condition = s_max / s_min;
        if condition.is_nan() || condition >= CONDITION_WARNING {
            curve.warnings.push(format!(
                "order {order}: design condition number {condition:.3e}"
            ));
        }
        let pinv = svd
            .pseudo_inverse(f64::EPSILON * s_max)
            .map_err(|e| Error::input(e.to_string()))?;
        let smoother = legendre_basis(&x_eval, order) * pinv;
        let predictions = smoother * &observations;

        let (mut bias2, mut var) = (0.0, 0.0);
        for (row, f) in predictions.row_iter().zip(&f_eval) {
            let mean = row.sum() / reps;
            bias2 += (mean - f).powi(2);
            var += row.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / reps;
        }
        curve.bias2.push(bias2 / n_eval);
        curve.var_prop.push(var / n_eval);
        curve.total.push((bias2 + var) / n_eval);
        curve.condition.push(condition);
    }

    let min = curve.total.iter().copied().fold(f64::INFINITY, f64::min);
    let idx = curve
        .total
        .iter()
        .position(|&t| t <= min + ARGMIN_TOLERANCE)
        .expect("grid is non-empty");
    curve.argmin_order = curve.orders[idx];
    curve.interior_minimum = idx > 0 && idx + 1 < curve.orders.len();
    Ok(curve)
}
