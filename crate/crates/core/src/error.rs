//! Error taxonomy shared by every module.
//!
//! Two failure families matter to callers: inputs that were rejected before
//! any numerics ran, and numerical breakdowns discovered mid-computation.
//! The CLI maps the former to exit status 2 and the latter to exit status 1.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input rejected up front: empty data, bad flag value, malformed config.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Shapes that do not line up, reported with both sides.
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: String,
        actual: String,
    },

    /// S·Sᵀ was not invertible and no ridge term was available to rescue it.
    #[error("singular normal equations: S·Sᵀ of size {size} has rank {rank}; \
             supply ridge_alpha > 0 or more independent samples")]
    Singular { size: usize, rank: usize },

    /// A computation produced a non-finite or otherwise unusable value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A file failed to parse; row is 1-based over data rows, column 1-based.
    #[error("parse error in {path} at row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status used by the CLI: 1 numerical, 2 usage/input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::Singular { .. } => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
