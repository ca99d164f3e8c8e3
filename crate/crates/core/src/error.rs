use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point outside chart: |x| = {norm} (limit {limit})")]
    OutsideChart { norm: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate direction: radial denominator {0:e}")]
    DegenerateDirection(f64),

    #[error("root not bracketed in [{lo}, {hi}]")]
    DomainExhausted { lo: f64, hi: f64 },

    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("point {0} has no contact within tolerance (pair is not dual)")]
    DanglingPoint(usize),

    #[error("ray missed the target level set within range {0}")]
    RayMiss(f64),

    #[error("singular frame: {0}")]
    SingularFrame(String),

    #[error("no convergence after {iterations} iterations: {reason}")]
    ConvergenceFailure { iterations: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
