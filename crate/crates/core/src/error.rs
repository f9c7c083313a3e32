use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),
    #[error("degenerate draw: total weight is zero")]
    DegenerateDraw,
    #[error("degenerate distances: mean distance is zero")]
    DegenerateDistances,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("enumeration budget exceeded: {support} outcomes (limit {limit})")]
    BudgetExceeded { support: u128, limit: u128 },
    #[error("need at least 2 trials, got {0}")]
    InsufficientTrials(usize),
    #[error("invalid folds: {0}")]
    InvalidFolds(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
