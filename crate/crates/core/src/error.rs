use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum DrenError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged{}: {reason}", fmt_epoch(*.epoch))]
    TrainingDiverged {
        epoch: Option<usize>,
        reason: String,
    },

    #[error("optimization failed at iteration {iteration}: {reason}")]
    OptimizationFailure { iteration: usize, reason: String },

    #[error("gradient oracle failed: {0}")]
    OracleFailure(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_epoch(epoch: Option<usize>) -> String {
    epoch.map(|e| format!(" at epoch {e}")).unwrap_or_default()
}

pub type Result<T, E = DrenError> = std::result::Result<T, E>;

pub(crate) fn invalid_input(msg: impl Into<String>) -> DrenError {
    DrenError::InvalidInput(msg.into())
}

pub(crate) fn invalid_config(msg: impl Into<String>) -> DrenError {
    DrenError::InvalidConfig(msg.into())
}

impl DrenError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DrenError::Io {
            path: path.into(),
            source,
        }
    }
}
