use std::path::PathBuf;

use sensaudit_core::Error as CoreError;

/// Exit status for every failure path.
pub mod exit {
    pub const OK: u8 = 0;
    pub const OTHER: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const MODEL_FAILURE: u8 = 3;
    pub const DEGENERATE: u8 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Study(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Core(CoreError::Input(_)) => exit::CONFIG,
            CliError::Core(CoreError::ModelFailure { .. } | CoreError::RowCountMismatch { .. }) => {
                exit::MODEL_FAILURE
            }
            CliError::Core(CoreError::DegenerateOutput(_)) => exit::DEGENERATE,
            _ => exit::OTHER,
        }
    }
}
