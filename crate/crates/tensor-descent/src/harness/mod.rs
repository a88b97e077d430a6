//! Experiment harness: finite-difference verification, slope fitting,
//! experiment configuration and persistence, and the acceptance check
//! suites behind the CLI.

pub mod experiment;
pub mod fd;
pub mod slope;
pub mod suites;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Solver(#[from] crate::error::SolverError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("fit error: {0}")]
    Fit(String),
}

pub type HResult<T> = std::result::Result<T, HarnessError>;
