use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("point {index} has a non-finite component or a non-positive weight")]
    InvalidPoint { index: usize },

    #[error("regression is undefined at {q:?}: kernel density is zero")]
    UndefinedAtQuery { q: Vec<f64> },

    #[error("no admissible evaluation points ({skipped} skipped)")]
    EmptyAdmissibleSet { skipped: usize },

    #[error("morton key needs {dims} x {bits} bits, more than 64")]
    MortonOverflow { dims: usize, bits: u32 },

    #[error("coordinate {value} does not fit in {bits} bits")]
    MortonCoordinate { value: u64, bits: u32 },

    #[error("no valid rows in input ({skipped} skipped)")]
    NoValidRows { skipped: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
