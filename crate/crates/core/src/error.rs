use thiserror::Error;

/// Errors produced by the optimizer library and its harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected:?}, found {found:?}")]
    Dimension {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("svd did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("rank-deficient input: singular value {value:e} is below threshold {threshold:e}")]
    RankDeficient { value: f64, threshold: f64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("step {step} outside schedule range 0..={total}")]
    ScheduleRange { step: u64, total: u64 },

    #[error("divergence at step {step}: loss is {loss}")]
    Divergence { step: u64, loss: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed record: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
