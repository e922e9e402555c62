//! Library half of the command-line front end.
//!
//! Everything the `mpdbm` binary does lives here so integration tests can
//! drive the same code paths directly: config parsing, dataset
//! construction, checkpoint persistence, metrics emission, the evaluation
//! suites, and the four subcommands.
//!
//! Errors carry an exit-code class: usage/config problems exit 1, runtime
//! or numeric failures exit 2, and verification failures (the self-check
//! suite finding a broken invariant) exit 3.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataio;
pub mod evals;
pub mod metrics;
pub mod util;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation or configuration; exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Runtime failure (I/O, numerics, malformed artifacts); exit code 2.
    #[error("{0}")]
    Runtime(String),
    /// A self-verification check failed; exit code 3.
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl From<mpdbm_core::Error> for CliError {
    fn from(e: mpdbm_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<checkpoint::CheckpointError> for CliError {
    fn from(e: checkpoint::CheckpointError) -> Self {
        CliError::Runtime(e.to_string())
    }
}
