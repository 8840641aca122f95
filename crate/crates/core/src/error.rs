use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("table has no label column")]
    NoLabelColumn,

    #[error("schema mismatch at column `{0}`")]
    SchemaMismatch(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("parse error at row {row}, column `{column}`: {content:?}")]
    ParseError {
        row: usize,
        column: String,
        content: String,
    },

    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("empty file")]
    EmptyFile,

    #[error("ragged row {0}")]
    RaggedRow(usize),

    #[error("table has no numeric columns")]
    NoNumericColumns,

    #[error("bad fold count k={k} for {n_rows} rows")]
    BadK { k: usize, n_rows: usize },

    #[error("empty column `{0}`")]
    EmptyColumn(String),

    #[error("need at least two numeric columns, found {0}")]
    TooFewNumericColumns(usize),

    #[error("no shared columns between tables")]
    NoSharedColumns,

    #[error("category lists differ")]
    CategoryMismatch,

    #[error("value {value} outside the domain of {what}")]
    DomainError { what: &'static str, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("need at least two reference rows, found {0}")]
    TooFewReferenceRows(usize),

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("conditional generator requires labels")]
    MissingLabels,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
