use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}, column {column:?}: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("fewer than 2 classes")]
    TooFewClasses,

    #[error("class {class} has {count} rows, at least {required} are needed")]
    ClassTooSmall {
        class: usize,
        count: usize,
        required: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("covariance is singular: {0}")]
    SingularCovariance(String),

    #[error("MCD cannot be computed when p>h (p = {p}, h = {h})")]
    McdInfeasible { p: usize, h: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("unknown method {0:?}")]
    UnknownMethod(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
