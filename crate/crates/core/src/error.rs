use thiserror::Error;

/// Errors produced by the modelling, transform and dataset routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("azimuth {query:.6} rad outside modelled span [{lo:.6}, {hi:.6}] rad")]
    OutOfSpan { query: f64, lo: f64, hi: f64 },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("parse error at key `{key}`: {reason}")]
    Parse { key: String, reason: String },

    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
