//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by dataset handling, training, and the bootstrapping
/// strategies.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// A constructor or operation precondition was violated.
    #[error("{0}")]
    InvalidData(String),

    #[error("{what}: expected dimension {expected}, got {got}")]
    Shape {
        what: String,
        expected: usize,
        got: usize,
    },

    /// A split or sampling request cannot be satisfied.
    #[error("sizing error for {what}: required {required}, available {available}")]
    Sizing {
        what: String,
        required: usize,
        available: usize,
    },

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    /// Asymmetric tri-training could not collect any agreement-based
    /// pseudo-labels, leaving the target head untrainable.
    #[error("no pseudo-labels for target head")]
    NoPseudoLabels,

    /// Parallel prediction lists do not line up.
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
