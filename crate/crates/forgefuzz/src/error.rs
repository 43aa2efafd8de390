use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("row {row}: unknown event type {value:?}")]
    UnknownEventType { row: usize, value: String },

    #[error("row {row}: follow rows are only accepted with the with-follows flag")]
    FollowRowWithoutFlag { row: usize },

    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("point set is empty")]
    EmptyPointSet,

    #[error("exact star discrepancy is guarded to at most {max} points, got {n}")]
    ExactGuard { n: usize, max: usize },

    #[error("unsupported dimension {0} (supported: 1..=3)")]
    BadDimension(usize),

    #[error("coordinate {0} outside the unit interval")]
    CoordinateRange(f64),

    #[error("constant input vector: rank correlation undefined")]
    ConstantInput,

    #[error("input length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("user sets do not match: {0}")]
    UserSetMismatch(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),
}

pub type Result<T> = std::result::Result<T, Error>;
