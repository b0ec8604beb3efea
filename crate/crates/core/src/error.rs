use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("empty matrix ({rows}x{cols}) is not allowed")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("finite-difference oracle: non-finite loss at coordinate {coordinate}")]
    NonFiniteOracle { coordinate: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid smoothing parameter {0}; expected a value in (0, 1]")]
    InvalidAlpha(f64),

    #[error("tape inconsistency: {0}")]
    Tape(String),

    #[error("length mismatch in {op}: {left} vs {right}")]
    Length {
        op: &'static str,
        left: usize,
        right: usize,
    },

    #[error("{file}: line {line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged at epoch {epoch} (last finite epoch: {last_finite:?})")]
    Diverged {
        epoch: usize,
        last_finite: Option<usize>,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
