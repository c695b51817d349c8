use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("iteration diverged at step {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error("AMP produced a non-finite value at iteration {iteration}, index {index} ({field})")]
    AmpNonFinite {
        iteration: usize,
        index: usize,
        field: &'static str,
    },

    #[error("search space of {size} configurations exceeds the enumeration limit {limit}")]
    SearchSpaceTooLarge { size: f64, limit: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
