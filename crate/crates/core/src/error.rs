use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A non-finite value entered or left a numeric primitive.
    #[error("numeric input error: {0}")]
    Numeric(String),

    #[error("shape error in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("tape state error: {0}")]
    State(String),

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("outside validity region: {0}")]
    Validity(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("format error in {path}: expected {expected}, found {actual}")]
    Format {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("length error in {path}: expected {expected} bytes, found {actual}")]
    Length {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
