use thiserror::Error;

use crate::oracle::Vector;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite {what}")]
    NonFinite { what: String },
    #[error("derivative order {requested} exceeds oracle order {max}")]
    UnsupportedOrder { requested: usize, max: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("subproblem solver hit the iteration cap ({iterations}) with residual {residual:.3e}")]
    ConvergenceFailure {
        iterations: u64,
        residual: f64,
        best: Box<Vector>,
    },
    #[error("step-size search failed after {probes} probes (last eta {last_eta:.3e})")]
    LambdaSearchFailure { probes: u64, last_eta: f64 },
    #[error("out of range: {0}")]
    Range(String),
    #[error("audit failure at iteration {k}: {what}")]
    AuditFailure { k: usize, what: String },
}

pub type Result<T> = std::result::Result<T, SolverError>;
