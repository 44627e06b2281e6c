use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate geometry: zero range between target and observer")]
    ZeroRange,

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("non-positive innovation covariance {0}")]
    NonPositiveInnovation(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("operation not supported: {0}")]
    Unsupported(&'static str),

    #[error("no non-diverged runs to aggregate")]
    EmptySeries,

    #[error("baseline `{0}` missing or non-positive")]
    MissingBaseline(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
