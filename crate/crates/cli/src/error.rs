use std::path::Path;

use thiserror::Error;

/// BSD `EX_USAGE`.
pub const EXIT_USAGE: i32 = 64;
/// BSD `EX_IOERR`.
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Solver(#[from] stefan_core::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Solver(e) if e.is_domain() => 1,
            CliError::Solver(_) | CliError::Failed(_) => 2,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}
