use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A hyperparameter or model parameter lies outside its admissible domain.
    #[error("domain error: {param} = {value} violates {bound}")]
    Domain {
        param: String,
        value: f64,
        bound: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A factorization failed even after escalating the diagonal jitter.
    #[error("numerical failure in {context} (last jitter tried: {jitter:e})")]
    Numerical { context: String, jitter: f64 },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("fit is undefined: reference impulse response is constant")]
    UndefinedFit,

    #[error("tuning failed: {0}")]
    Tuning(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(param: impl Into<String>, value: f64, bound: impl Into<String>) -> Self {
        Error::Domain {
            param: param.into(),
            value,
            bound: bound.into(),
        }
    }

    /// True for failures that stem from floating-point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical { .. } | Error::NoSolution(_) | Error::Tuning(_) | Error::UndefinedFit
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
