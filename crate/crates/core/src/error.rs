use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Both arguments of the closed-form correction are zero; every roll angle
    /// scores the same and the caller should keep its previous angle.
    #[error("degenerate alignment: correction angle is undefined")]
    DegenerateAlignment,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("trial has no completion time: {0}")]
    NoCompletion(String),

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaMismatch { found: u32, expected: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wire error: {0}")]
    Wire(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
