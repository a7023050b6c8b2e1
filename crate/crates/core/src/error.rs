use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unequal sample sizes: {left} vs {right}")]
    UnequalSampleSizes { left: usize, right: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("non-finite observation at index {0}")]
    NonFinite(usize),

    #[error("transport order must satisfy r >= 1, got {0}")]
    InvalidOrder(f64),

    /// The reference law lacks the moment needed for the requested distance.
    #[error("W{order} undefined: reference law has no finite moment of order {order}")]
    MomentUndefined { order: f64 },

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("oracle is desk-scale only: {points} points exceed the limit of {limit}")]
    OracleTooLarge { points: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergent { iterations: usize, residual: f64 },

    #[error("no rate prediction: {0}")]
    NoPrediction(String),

    #[error("kernel too noisy: clipped negative spectrum is {clip_fraction:.4} of the trace")]
    KernelTooNoisy { clip_fraction: f64 },

    #[error("too few exceedances: {found} at the largest threshold, need {needed}")]
    TooFewExceedances { found: usize, needed: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
