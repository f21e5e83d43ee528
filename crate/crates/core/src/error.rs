use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density is not integrable: tail exponent delta - gamma = {tail} must exceed 1")]
    NonIntegrable { tail: f64 },

    #[error("point-mass mixture has no pointwise density")]
    DegenerateDensity,

    #[error("moment of order {order} diverges (requires order < {limit})")]
    DivergentMoment { order: f64, limit: f64 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("non-positive price {price} at line {line}")]
    NonPositivePrice { line: usize, price: f64 },

    #[error("no complete sessions: every day was dropped")]
    NoCompleteSessions,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
