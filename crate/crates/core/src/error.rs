use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside the valid range {range}")]
    Range {
        name: &'static str,
        value: f64,
        range: String,
    },

    #[error("matrix is singular or not positive definite: pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },

    #[error("invalid correlation matrix: {0}")]
    InvalidMatrix(String),

    #[error("boundary is not nondecreasing at position {index} ({prev} > {next})")]
    NonMonotone { index: usize, prev: f64, next: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("samples share the value {value} across pools; cross-pool ties are not supported")]
    CrossPoolTie { value: f64 },

    #[error("could not bracket a root for target {target} within [{lo}, {hi}]")]
    Bracketing { target: f64, lo: f64, hi: f64 },

    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn range(name: &'static str, value: f64, range: impl Into<String>) -> Self {
        Error::Range {
            name,
            value,
            range: range.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
