use thiserror::Error;

/// Errors raised by estimation, inference and testing routines.
#[derive(Debug, Error)]
pub enum GcprError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("trend powers outside the parameter space: {0}")]
    InvalidTheta(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("design matrix is rank deficient (column {column} is numerically dependent)")]
    RankDeficient { column: usize },

    #[error("power {power} at horizon {horizon} overflows (|power * ln horizon| > 700)")]
    Overflow { power: f64, horizon: f64 },

    #[error("empty grid: {0}")]
    EmptyGrid(String),

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix is not positive (semi)definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("tail probability {prob} is below the critical-value table resolution {min}")]
    TableResolution { prob: f64, min: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GcprError>;
