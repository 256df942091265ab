//! Experiment harness: configuration, the four experiment commands and the
//! run records they leave behind.

pub mod commands;
pub mod config;
pub mod record;

use thiserror::Error;

pub use commands::{cmd_decay_study, cmd_invariants, cmd_linear_oracle, cmd_simulate, RunOptions};
pub use config::ExperimentConfig;
pub use record::RunRecord;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invariant check failed: {0}")]
    Invariant(String),
    #[error("non-finite state: {0}")]
    NonFinite(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::NonFinite(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<gevrey_core::Error> for CliError {
    fn from(e: gevrey_core::Error) -> Self {
        match e {
            gevrey_core::Error::NonFinite { .. } => CliError::NonFinite(e.to_string()),
            gevrey_core::Error::Io(m) => CliError::Io(m),
            other => CliError::Config(other.to_string()),
        }
    }
}
