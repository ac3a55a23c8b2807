use std::path::PathBuf;

use thiserror::Error;

/// Every failure the pipeline can surface, from file parsing to numeric pivots.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows x {cols} columns")]
    NonSquare { rows: usize, cols: usize },

    #[error("unsupported Matrix Market header: {0}")]
    UnsupportedField(String),

    #[error("malformed entry on line {line}: {reason}")]
    MalformedEntry { line: usize, reason: String },

    #[error("matrix has order zero")]
    EmptyMatrix,

    #[error("index ({row}, {col}) out of range for order {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("pattern is not structurally symmetric: ({row}, {col}) has no mirror")]
    NotSymmetric { row: usize, col: usize },

    #[error("diagonal entry ({0}, {0}) is missing")]
    MissingDiagonal(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix has no nonzeros to normalize by")]
    DegenerateMatrix,

    #[error("percentage curve is degenerate: {0}")]
    DegenerateCurve(String),

    #[error("zero pivot in diagonal block {block}, local column {column} (|pivot| = {magnitude:e})")]
    ZeroPivot {
        block: usize,
        column: usize,
        magnitude: f64,
    },

    #[error("update writes ({row}, {col}) outside the filled support of block ({block_row}, {block_col})")]
    SupportViolation {
        block_row: usize,
        block_col: usize,
        row: usize,
        col: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code: 1 numerical failure, 2 bad parameters or input
    /// structure, 3 file access or format.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ZeroPivot { .. } | Error::SupportViolation { .. } => 1,
            Error::Io { .. } | Error::MalformedEntry { .. } | Error::UnsupportedField(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
