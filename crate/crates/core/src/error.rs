use thiserror::Error;

/// Errors surfaced by construction and by operations whose preconditions can
/// fail at runtime. Soft conditions (mass at a boundary, truncated tails)
/// travel as [`crate::warn::Warning`]s instead.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("grid axis {axis}: points per axis must be positive and even, got {points}")]
    InvalidGridPoints { axis: usize, points: usize },

    #[error("grid axis {axis}: half width must be positive and finite, got {half_width}")]
    InvalidHalfWidth { axis: usize, half_width: f64 },

    #[error("{context}: expected dimension {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("grid mismatch in {context}: {detail}")]
    GridMismatch {
        context: &'static str,
        detail: String,
    },

    #[error("{context}: sample count {got} does not match grid size {expected}")]
    SampleCount {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite sample at flat index {index}")]
    NonFinite { index: usize },

    #[error("{context}: matrix is singular or numerically rank deficient")]
    Singular { context: &'static str },

    #[error("weight family {family} is not strictly positive: value {value} at {point:?}")]
    NonPositiveWeight {
        family: &'static str,
        value: f64,
        point: Vec<f64>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("phase rejected: {0}")]
    PhaseInvalid(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
