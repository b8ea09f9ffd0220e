use thiserror::Error;

/// Errors produced by the numerical kernels.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("gram matrix is not symmetric positive-definite")]
    NotPositiveDefinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at step {step} ({context})")]
    NonFinite { step: usize, context: String },

    #[error("mode ({0}, {1}) lies outside the truncation radius {2}")]
    ModeOutsideTruncation(i32, i32, u32),
}

pub type Result<T> = std::result::Result<T, CoreError>;
