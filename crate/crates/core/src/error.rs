use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator, the analytic routines and the estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or run configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// The run would exceed the configured memory budget.
    #[error("resource error: {0}")]
    Resource(String),

    /// A numerical routine failed to reach its tolerance.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Malformed input, reported with its 1-based line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Well-formed input whose values break a contract.
    #[error("validation error at row {row}: {message}")]
    Validation { row: u64, message: String },

    /// A site pairing overlaps or points outside the genome.
    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Convergence(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
