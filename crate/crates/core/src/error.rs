use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("{path}: row {row}, column `{column}`: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: duplicate entry for date {date} and ticker `{ticker}`")]
    DuplicateRow {
        path: PathBuf,
        date: NaiveDate,
        ticker: String,
    },

    #[error("{0}: file contains no data rows")]
    EmptyFile(PathBuf),

    #[error("empty universe after cleaning")]
    EmptyUniverse,

    #[error("date intersection of the merged panels is empty")]
    EmptyIntersection,

    #[error("non-positive price {price} for `{ticker}` on {date}")]
    NonPositivePrice {
        ticker: String,
        date: NaiveDate,
        price: f64,
    },

    #[error("zero-variance return column for `{0}`")]
    ZeroVariance(String),

    #[error("symmetric eigen-solver failed to converge")]
    EigenNoConvergence,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("constraint set is infeasible on the probability simplex")]
    Infeasible,

    #[error("quadratic program did not terminate within {0} iterations")]
    IterationLimit(usize),

    #[error("degenerate eigenportfolio: entry sum of scaled eigenvector is zero")]
    DegenerateEigenportfolio,

    #[error("degenerate matrix: {0}")]
    Degenerate(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
