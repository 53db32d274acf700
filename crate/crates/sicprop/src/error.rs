use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SicError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {requested} exceeds the configured maximum {limit}")]
    Capacity { requested: usize, limit: usize },
    #[error("out of range: {0}")]
    Range(String),
    #[error("accuracy target missed: {what} (achieved {achieved:.3e})")]
    Accuracy { what: String, achieved: f64 },
    #[error("caustic: sin(omega*a*T) vanishes near n = {n} (margin {margin:.3e})")]
    Caustic { n: i64, margin: f64 },
    #[error("degenerate composition: S_cc' + S_cc = {0:.3e}")]
    DegenerateComposition(f64),
    #[error("zero effective time: use the identity kernel instead")]
    DeltaLimit,
    #[error("grid resolution insufficient: {0}")]
    Resolution(String),
}

pub type Result<T> = std::result::Result<T, SicError>;
