use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("alignment failed (peak response {peak:.4})")]
    AlignmentFailed { peak: f64 },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("mask error: {0}")]
    Mask(String),
    #[error("requested {requested} points but only {available} pixels are usable")]
    NotEnoughPixels { requested: usize, available: usize },
    #[error("incompatible fingerprints: {0}")]
    IncompatibleFingerprints(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
