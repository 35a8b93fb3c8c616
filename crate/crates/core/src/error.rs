use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range for ambient dimension {ambient}")]
    IndexOutOfRange { index: usize, ambient: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Gram system too ill-conditioned to solve reliably.
    #[error("singular Gram system (estimated condition number {condition:.3e})")]
    SingularGram { condition: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("non-finite iterate after {iteration} iterations")]
    NonFiniteIterate { iteration: usize },

    #[error("enumeration of {count} supports exceeds the cap of {cap}")]
    EnumerationTooLarge { count: u128, cap: u128 },

    #[error("empty input")]
    EmptyInput,

    #[error("{0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status for this error: usage errors map to 2, everything
    /// else to 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
