//! Command-line laboratory around the `ruelle` crate: config ingestion,
//! command dispatch, and deterministic CSV emission.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

/// Exit codes: 0 success, 2 configuration/usage error, 3 numerical
/// non-convergence.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Core(ruelle::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Core(ruelle::Error::Numerical { .. }) => 3,
            CliError::Core(_) => 2,
        }
    }
}
