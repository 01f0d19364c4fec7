//! Monte Carlo driver: runs a model over every row of a design and keeps the
//! outputs aligned with their rows.

mod builtin;
mod external;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::factors::FactorSet;

pub use builtin::{ishigami, linear_additive, polynomial, pure_interaction, sobol_g, BuiltinModel};
pub use external::{
    read_outputs, run_external, write_inputs, ExternalModel, INPUTS_FILE, OUTPUTS_FILE, SEED_ENV,
};

/// Anything that maps one point in factor units to a scalar output.
pub trait Model: Sync {
    fn evaluate_point(&self, x: &[f64]) -> f64;
}

impl<F> Model for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate_point(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

impl Model for BuiltinModel {
    fn evaluate_point(&self, x: &[f64]) -> f64 {
        BuiltinModel::evaluate_point(self, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelRef {
    Builtin(BuiltinModel),
    External(ExternalModel),
    /// In-process model supplied by a library caller; `id` labels it in reports.
    Custom {
        id: String,
    },
}

impl ModelRef {
    pub fn label(&self) -> String {
        match self {
            ModelRef::Builtin(b) => format!("builtin:{}", b.name()),
            ModelRef::External(e) => format!("external:{}", e.command.join(" ")),
            ModelRef::Custom { id } => format!("custom:{id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFailure {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailurePolicy {
    /// Any failed row fails the batch.
    #[default]
    Abort,
    /// Failed rows are recorded and dropped.
    DropRows,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluateOptions {
    /// Worker threads; 0 uses the global pool.
    pub parallelism: usize,
    pub failure_policy: FailurePolicy,
    pub seed: u64,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        EvaluateOptions {
            parallelism: 0,
            failure_policy: FailurePolicy::Abort,
            seed: 0,
        }
    }
}

/// Design rows, their factor values, and the outputs that survived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationBatch {
    design: DesignMatrix,
    factor_names: Vec<String>,
    x_values: Vec<f64>,
    y: Vec<f64>,
    kept_rows: Vec<usize>,
    failures: Vec<RowFailure>,
    model: ModelRef,
    seed: u64,
    wall_time: f64,
}

impl EvaluationBatch {
    /// Builds a batch from one raw result per design row, applying `policy`.
    pub fn assemble(
        design: DesignMatrix,
        factors: &FactorSet,
        x_values: Vec<f64>,
        raw: Vec<std::result::Result<f64, String>>,
        model: ModelRef,
        seed: u64,
        policy: FailurePolicy,
    ) -> Result<Self> {
        if raw.len() != design.rows() || x_values.len() != design.rows() * design.k {
            return Err(Error::input("outputs do not match the design row count"));
        }
        let mut y = Vec::with_capacity(raw.len());
        let mut kept_rows = Vec::with_capacity(raw.len());
        let mut failures = Vec::new();
        for (row, r) in raw.into_iter().enumerate() {
            match r {
                Ok(v) if v.is_finite() => {
                    y.push(v);
                    kept_rows.push(row);
                }
                Ok(_) => failures.push(RowFailure {
                    row,
                    reason: "non-finite output".into(),
                }),
                Err(reason) => failures.push(RowFailure { row, reason }),
            }
        }
        if !failures.is_empty() && (policy == FailurePolicy::Abort || y.is_empty()) {
            let message = if y.is_empty() {
                format!("all {} rows failed", failures.len())
            } else {
                format!(
                    "{} of {} rows failed (first: row {}: {})",
                    failures.len(),
                    design.rows(),
                    failures[0].row,
                    failures[0].reason
                )
            };
            return Err(Error::ModelFailure { message, failures });
        }
        Ok(EvaluationBatch {
            design,
            factor_names: factors.names().into_iter().map(String::from).collect(),
            x_values,
            y,
            kept_rows,
            failures,
            model,
            seed,
            wall_time: 0.0,
        })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn factor_names(&self) -> &[String] {
        &self.factor_names
    }

    pub fn k(&self) -> usize {
        self.design.k
    }

    /// Outputs of rows that succeeded, in design-row order.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Design row index of each entry of [`y`](Self::y).
    pub fn kept_rows(&self) -> &[usize] {
        &self.kept_rows
    }

    pub fn failures(&self) -> &[RowFailure] {
        &self.failures
    }

    pub fn model(&self) -> &ModelRef {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn wall_time(&self) -> f64 {
        self.wall_time
    }

    /// Factor values of design row `row`.
    pub fn x_row(&self, row: usize) -> &[f64] {
        let k = self.design.k;
        &self.x_values[row * k..(row + 1) * k]
    }

    /// One entry per design row; `None` for dropped rows.
    pub fn outputs_by_row(&self) -> Vec<Option<f64>> {
        let mut out = vec![None; self.design.rows()];
        for (&row, &v) in self.kept_rows.iter().zip(&self.y) {
            out[row] = Some(v);
        }
        out
    }

    /// Same batch with every output mapped through `f`.
    pub fn map_outputs(&self, f: impl Fn(f64) -> f64) -> EvaluationBatch {
        let mut b = self.clone();
        b.y.iter_mut().for_each(|v| *v = f(*v));
        b
    }

    /// Raw batch as CSV: factor values, `__tag`, and `y` (empty when dropped).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header: Vec<&str> = self.factor_names.iter().map(String::as_str).collect();
        header.extend(["__tag", "y"]);
        w.write_record(&header)?;
        for (row, y) in self.outputs_by_row().into_iter().enumerate() {
            let mut rec: Vec<String> = self.x_row(row).iter().map(f64::to_string).collect();
            rec.push(self.design.tag(row).to_string());
            rec.push(y.map(|v| v.to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn transform_design(factors: &FactorSet, design: &DesignMatrix) -> Result<Vec<f64>> {
    if design.k != factors.k() {
        return Err(Error::input(format!(
            "design has {} columns but {} factors are declared",
            design.k,
            factors.k()
        )));
    }
    let mut x = Vec::with_capacity(design.values().len());
    for row in design.iter_rows() {
        x.extend(factors.transform_row(row)?);
    }
    Ok(x)
}

fn run_pointwise<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    k: usize,
    parallelism: usize,
) -> Result<Vec<f64>> {
    let work = || {
        x.par_chunks_exact(k)
            .map(|row| model.evaluate_point(row))
            .collect()
    };
    if parallelism == 0 {
        return Ok(work());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::input(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(work))
}

/// Evaluates `model` on every design row.
///
/// Results are gathered by row index, so they do not depend on the worker
/// count or completion order.
pub fn evaluate(
    model: &ModelRef,
    factors: &FactorSet,
    design: &DesignMatrix,
    opts: &EvaluateOptions,
) -> Result<EvaluationBatch> {
    let start = Instant::now();
    let x = transform_design(factors, design)?;
    let raw: Vec<std::result::Result<f64, String>> = match model {
        ModelRef::Builtin(b) => {
            b.validate(factors.k())?;
            run_pointwise(b, &x, design.k, opts.parallelism)?
                .into_iter()
                .map(Ok)
                .collect()
        }
        ModelRef::External(ext) => run_external(ext, &factors.names(), &x, opts.seed)?,
        ModelRef::Custom { id } => {
            return Err(Error::input(format!(
                "custom model '{id}' must be evaluated with evaluate_with"
            )))
        }
    };
    let mut batch = EvaluationBatch::assemble(
        design.clone(),
        factors,
        x,
        raw,
        model.clone(),
        opts.seed,
        opts.failure_policy,
    )?;
    batch.wall_time = start.elapsed().as_secs_f64();
    Ok(batch)
}

/// Evaluates an in-process model (closure or [`Model`] impl).
pub fn evaluate_with<M: Model + ?Sized>(
    model: &M,
    id: &str,
    factors: &FactorSet,
    design: &DesignMatrix,
    opts: &EvaluateOptions,
) -> Result<EvaluationBatch> {
    let start = Instant::now();
    let x = transform_design(factors, design)?;
    let raw = run_pointwise(model, &x, design.k, opts.parallelism)?
        .into_iter()
        .map(Ok)
        .collect();
    let mut batch = EvaluationBatch::assemble(
        design.clone(),
        factors,
        x,
        raw,
        ModelRef::Custom { id: id.to_string() },
        opts.seed,
        opts.failure_policy,
    )?;
    batch.wall_time = start.elapsed().as_secs_f64();
    Ok(batch)
}
