use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the geometry, flow, estimate, and I/O layers.
#[derive(Debug, Error)]
pub enum FlowError {
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("linear solve residual {residual:e} exceeds tolerance {tol:e}")]
    SolverFailure { residual: f64, tol: f64 },

    #[error("singularity detected at t = {time}: {reason}")]
    SingularityDetected { time: f64, reason: String },

    #[error("interpolation exponent sigma = {0} is outside [0, 1]")]
    BadExponent(f64),

    #[error("value {value} is outside the computed range of g (max {max})")]
    OutOfDomain { value: f64, max: f64 },

    #[error("trajectory window mismatch: {0}")]
    WindowMismatch(String),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("parse error in {path:?}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FlowError>;
