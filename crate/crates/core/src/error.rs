use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error at row {row}: {message}")]
    Validation { row: usize, message: String },

    #[error("validation error: {0}")]
    InvalidData(String),

    #[error("input file is empty")]
    EmptyFile,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("singular design or information matrix: {0}")]
    Singular(String),

    #[error("model fit diverged after {iterations} iterations (max |score| = {score_norm:e}): {reason}")]
    Divergence {
        iterations: usize,
        score_norm: f64,
        reason: String,
        coefficients: Vec<f64>,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate variance estimate ({0})")]
    DegenerateVariance(f64),

    #[error("division by a degenerate quantity: {0}")]
    Degenerate(String),

    #[error("infeasible scenario: {0}")]
    Scenario(String),

    #[error("bootstrap failed: {dropped} of {requested} replicates could not be computed")]
    Bootstrap { dropped: usize, requested: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),
}
