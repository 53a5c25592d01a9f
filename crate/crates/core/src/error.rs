use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("parameter out of domain: {0}")]
    Parameter(String),

    /// A size guard was exceeded (matrix dimension, codebook bits, ...).
    #[error("capacity exceeded: {what} = {requested} (limit {limit})")]
    Capacity {
        what: &'static str,
        requested: u64,
        limit: u64,
    },

    /// Input data violates a structural invariant (Hermitian, unitary, sorted, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("degenerate source: spectrum has no positive eigenvalue")]
    DegenerateSource,

    #[error("empty batch")]
    EmptyBatch,

    #[error("{what} did not converge after {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },

    /// Malformed channel dump, codebook file or config.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Convergence { .. } => 3,
            _ => 1,
        }
    }
}
