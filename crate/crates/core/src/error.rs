use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("position k = {k} lies beyond the breakpoint schedule (covers k <= {covered})")]
    ScheduleTooShort { k: u64, covered: u64 },

    #[error("breakpoint n_{index} does not fit in 64 bits")]
    BreakpointOverflow { index: usize },

    #[error("shift index i = {0} is out of range (1 <= i <= 63)")]
    ShiftIndexOutOfRange(usize),

    #[error("ambient dimension mismatch: {left} vs {right}")]
    AmbientMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid tolerance policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid system specification: {0}")]
    InvalidSpec(String),

    #[error("problem too large for dense computation: {0}")]
    TooLarge(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("property violated: {clause}: {detail}")]
    PropertyViolation { clause: String, detail: String },

    #[error("certificate refused: {clause} (residual {residual:e} > {tolerance:e})")]
    CertificateRefused {
        clause: String,
        residual: f64,
        tolerance: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
