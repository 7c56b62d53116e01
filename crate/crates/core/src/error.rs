//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file (JSON/CSV syntax, bad header, ...).
    #[error("parse error: {0}")]
    Parse(String),

    /// Input parsed but violates a scenario or model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Bad argument to a library operation (degenerate segment, non-unit
    /// direction, out-of-range parameter, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
