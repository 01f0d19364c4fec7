//! File-based protocol for third-party models.
//!
//! The driver writes `inputs.csv` (header = factor names, one row per run)
//! into the model's working directory, runs the command once, and reads back
//! `outputs.csv` with a single `y` column in the same row order. Both files are
//! UTF-8, comma-separated, LF-terminated, with a mandatory header row. The
//! seed is exported as `SENSAUDIT_SEED`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::RowFailure;
use crate::error::{Error, Result};

pub const INPUTS_FILE: &str = "inputs.csv";
pub const OUTPUTS_FILE: &str = "outputs.csv";
pub const SEED_ENV: &str = "SENSAUDIT_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalModel {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub io_dir: PathBuf,
    /// Spawn once per row instead of once per batch.
    #[serde(default)]
    pub per_row: bool,
    #[serde(default)]
    pub timeout_secs: Option<f64>,
}

impl ExternalModel {
    pub fn new(command: Vec<String>, io_dir: impl Into<PathBuf>) -> Self {
        ExternalModel {
            command,
            io_dir: io_dir.into(),
            per_row: false,
            timeout_secs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.command.first().is_none_or(|p| p.trim().is_empty()) {
            return Err(Error::input("external model command is empty"));
        }
        if let Some(t) = self.timeout_secs {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::input(format!("timeout must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Writes the `inputs.csv` file for `x_values` (row-major, `names.len()` columns).
pub fn write_inputs(path: &Path, names: &[&str], x_values: &[f64]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::at_path(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    w.write_record(names)?;
    for row in x_values.chunks_exact(names.len()) {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `outputs.csv`. Unparseable cells become per-row failures; a wrong
/// header or row count fails the whole batch.
pub fn read_outputs(path: &Path, expected_rows: usize) -> Result<Vec<Result<f64, String>>> {
    if !path.exists() {
        return Err(Error::ModelFailure {
            message: format!("model did not produce {}", path.display()),
            failures: Vec::new(),
        });
    }
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() != 1 || &header[0] != "y" {
        return Err(Error::ModelFailure {
            message: format!(
                "{} must have a single column named 'y', found {:?}",
                path.display(),
                header.iter().collect::<Vec<_>>()
            ),
            failures: Vec::new(),
        });
    }
    let mut values = Vec::with_capacity(expected_rows);
    for record in r.records() {
        let record = record?;
        let cell = record.get(0).unwrap_or("");
        values.push(
            cell.parse::<f64>()
                .map_err(|_| format!("malformed output '{cell}'")),
        );
    }
    if values.len() != expected_rows {
        return Err(Error::RowCountMismatch {
            expected: expected_rows,
            got: values.len(),
        });
    }
    Ok(values)
}

/// Runs the model over all rows and returns one raw output per row.
pub fn run_external(
    model: &ExternalModel,
    names: &[&str],
    x_values: &[f64],
    seed: u64,
) -> Result<Vec<Result<f64, String>>> {
    model.validate()?;
    fs::create_dir_all(&model.io_dir).map_err(|e| Error::at_path(&model.io_dir, e))?;
    let rows = x_values.len() / names.len().max(1);
    if !model.per_row {
        return run_once(model, names, x_values, rows, seed).map_err(|e| match e {
            Error::ModelFailure { message, failures } if failures.is_empty() => {
                Error::ModelFailure {
                    failures: (0..rows)
                        .map(|row| RowFailure {
                            row,
                            reason: message.clone(),
                        })
                        .collect(),
                    message,
                }
            }
            other => other,
        });
    }

    let k = names.len();
    let mut out = Vec::with_capacity(rows);
    for row in x_values.chunks_exact(k) {
        match run_once(model, names, row, 1, seed) {
            Ok(mut v) => out.push(v.pop().expect("one row")),
            Err(Error::ModelFailure { message, .. }) => out.push(Err(message)),
            Err(Error::RowCountMismatch { got, .. }) => out.push(Err(format!(
                "output row count mismatch: expected 1 row, got {got}"
            ))),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn run_once(
    model: &ExternalModel,
    names: &[&str],
    x_values: &[f64],
    rows: usize,
    seed: u64,
) -> Result<Vec<Result<f64, String>>> {
    let inputs = model.io_dir.join(INPUTS_FILE);
    let outputs = model.io_dir.join(OUTPUTS_FILE);
    write_inputs(&inputs, names, x_values)?;
    if outputs.exists() {
        fs::remove_file(&outputs).map_err(|e| Error::at_path(&outputs, e))?;
    }

    let status = spawn_and_wait(model, seed)?;
    if !status.success() {
        return Err(Error::ModelFailure {
            message: format!("external model exited with {status}"),
            failures: Vec::new(),
        });
    }
    read_outputs(&outputs, rows)
}

fn resolve_program(program: &str) -> PathBuf {
    let p = Path::new(program);
    if p.components().count() > 1 && p.is_relative() {
        // Relative paths are resolved against the caller, not the model's io_dir.
        std::env::current_dir()
            .map(|d| d.join(p))
            .unwrap_or_else(|_| p.to_path_buf())
    } else {
        p.to_path_buf()
    }
}

fn spawn_and_wait(model: &ExternalModel, seed: u64) -> Result<ExitStatus> {
    let log = |name: &str| -> Result<File> {
        let path = model.io_dir.join(name);
        File::create(&path).map_err(|e| Error::at_path(&path, e))
    };
    let mut child = Command::new(resolve_program(&model.command[0]))
        .args(&model.command[1..])
        .current_dir(&model.io_dir)
        .env(SEED_ENV, seed.to_string())
        .stdin(Stdio::null())
        .stdout(log("stdout.log")?)
        .stderr(log("stderr.log")?)
        .spawn()
        .map_err(|e| Error::ModelFailure {
            message: format!("could not start '{}': {e}", model.command[0]),
            failures: Vec::new(),
        })?;

    let Some(limit) = model.timeout_secs.map(Duration::from_secs_f64) else {
        return Ok(child.wait()?);
    };
    let start = Instant::now();
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(status);
        }
        if start.elapsed() >= limit {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::ModelFailure {
                message: format!("external model timed out after {:.3}s", limit.as_secs_f64()),
                failures: Vec::new(),
            });
        }
        thread::sleep(Duration::from_millis(5));
    }
}
