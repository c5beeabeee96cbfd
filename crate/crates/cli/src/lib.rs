//! Batch driver behind the `deadoil` binary.

// `!(x > 0.0)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod manifest;

use deadoil_core::Error as CoreError;

pub use commands::{run, Command, RunArgs, RunSummary};
pub use config::ScenarioConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(#[source] CoreError),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Invalid inputs become config errors; everything else is numeric.
    pub fn precondition(e: CoreError) -> Self {
        match e {
            CoreError::InvalidGrid(_)
            | CoreError::InvalidTimeGrid(_)
            | CoreError::GridMismatch(_)
            | CoreError::InvalidParameter { .. }
            | CoreError::UnknownFamily(_)
            | CoreError::InvalidTable(_)
            | CoreError::LevelMismatch(_)
            | CoreError::MalformedField { .. } => CliError::Config(e.to_string()),
            CoreError::Io(io) => CliError::Io(io),
            other => CliError::Numeric(other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::precondition(e)
    }
}
