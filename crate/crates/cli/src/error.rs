use std::path::Path;
use thiserror::Error;

/// Command failure, classified by who has to act on it.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, missing arguments or an unusable configuration.
    #[error("{0}")]
    Usage(String),
    /// Input artifacts that are missing, malformed or inconsistent.
    #[error("{0}")]
    Data(String),
    /// Anything that points at a bug rather than at the inputs.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    pub(crate) fn data(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
