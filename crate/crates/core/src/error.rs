use std::path::PathBuf;

use crate::harness::RowFailure;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// The request exceeds what the implementation supports (e.g. dimension).
    #[error("unsupported: {0}")]
    Capability(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Output variance is zero, so every variance ratio is 0/0.
    #[error("sensitivity undefined for constant output ({0})")]
    DegenerateOutput(String),

    #[error("model failure: {message}")]
    ModelFailure {
        message: String,
        failures: Vec<RowFailure>,
    },

    #[error("output row count mismatch: expected {expected} rows, got {got}")]
    RowCountMismatch { expected: usize, got: usize },

    #[error("linkage error: {0}")]
    Linkage(String),

    #[error("{path}: {source}")]
    Path {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn at_path(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Path {
            path: path.into(),
            source,
        }
    }
}
