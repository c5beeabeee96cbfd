use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("grid mismatch in {0}")]
    GridMismatch(&'static str),

    #[error("invalid parameter `{name}`: requires {constraint}, got {value}")]
    InvalidParameter {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },

    #[error("unknown coefficient family `{0}`")]
    UnknownFamily(String),

    #[error("invalid coefficient table: {0}")]
    InvalidTable(String),

    #[error("level count mismatch: {0}")]
    LevelMismatch(String),

    #[error(
        "non-finite state after step {step} (tau = {tau:.6e} vs stability bound {tau_max:.6e}); \
         reduce the time step"
    )]
    Unstable { step: usize, tau: f64, tau_max: f64 },

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("linear solver breakdown at iteration {iteration}")]
    Breakdown { iteration: usize },

    #[error("linear solver did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("malformed field file {path}: {reason}")]
    MalformedField { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
