use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum CpdError {
    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("tensor capacity exceeded: {elems} entries (limit {limit})")]
    CapacityExceeded { elems: u128, limit: u128 },

    #[error("column counts differ: {left} vs {right}")]
    ColumnCountMismatch { left: usize, right: usize },

    #[error("rank mismatch: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("operator failed the SPD spot-check")]
    NotSpdOperator,

    #[error("zero diagonal entry at index {0}")]
    ZeroDiagonal(usize),

    #[error("not a descent direction (directional derivative {0} >= 0)")]
    NotDescent(f64),

    #[error("line search found no decrease within its evaluation budget")]
    NoDecrease,

    #[error("conjugacy parameter denominator vanished")]
    ZeroDenominator,

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CpdError>;
