use thiserror::Error;

/// Errors raised by the model, data and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid observation pattern: {0}")]
    InvalidPattern(String),
    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("rows share no jointly observed coordinate")]
    IncomparableRows,
    #[error("no donor rows available for cell ({row}, {column})")]
    NoDonors { row: usize, column: usize },
    #[error("summary undefined: {0}")]
    UndefinedSummary(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
