use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lifting parameter a_{index} is not finite ({value})")]
    NonFiniteParam { index: usize, value: f64 },

    #[error("expected {expected} lifting parameters, got {actual}")]
    ParamCount { expected: usize, actual: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("design matrix is rank deficient (rank {rank} < {steps})")]
    RankDeficient { rank: usize, steps: usize },

    #[error("signal length {0} must be even")]
    OddLength(usize),

    #[error("signal length {len} is shorter than the high-pass support {support}")]
    TooShort { len: usize, support: usize },

    #[error("dimensions must be even (got {rows}x{cols})")]
    OddDimensions { rows: usize, cols: usize },

    #[error("image {rows}x{cols} is smaller than the filter support {support}")]
    ImageTooSmall {
        rows: usize,
        cols: usize,
        support: usize,
    },

    #[error("image contains a non-finite value at ({row}, {col})")]
    NonFiniteValue { row: usize, col: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid PGM: {0}")]
    Pgm(String),

    #[error("corrupt subband archive: {0}")]
    Archive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
