//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension disagreement between an operation's inputs.
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    /// An argument fell outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear system could not be solved reliably.
    #[error("singular system: {0}")]
    Singular(String),

    /// Training diverged or produced non-finite values.
    #[error("training aborted: {0}")]
    Training(String),

    /// A persisted container is malformed or of an unknown version.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Invalid experiment or model configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
