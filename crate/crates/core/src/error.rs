use thiserror::Error;

/// Errors surfaced by measure construction, transport solves, map evaluation,
/// and the expression language.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {context}: {value}")]
    NonFinite { context: &'static str, value: f64 },

    #[error("negative weight {weight} at atom {index}")]
    NegativeWeight { index: usize, weight: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("evaluation error at byte {offset}: {message}")]
    Eval { offset: usize, message: String },

    #[error("support size {size} exceeds the exact-solver limit {limit}; subsample the measure first")]
    SupportTooLarge { size: usize, limit: usize },

    #[error("assignment oracle requires two uniform measures of equal support size <= {limit}")]
    OracleUnsupported { limit: usize },

    #[error("measure file: {0}")]
    MeasureFile(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
