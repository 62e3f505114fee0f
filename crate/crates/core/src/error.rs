use std::path::PathBuf;

use thiserror::Error;

use crate::features::FeatureId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied arguments outside an operation's domain.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A clustering is not a partition of its features or holds two features
    /// of one image in a cluster.
    #[error("invalid clustering: {0}")]
    Validation(String),

    #[error("duplicate feature id {0}")]
    DuplicateFeature(FeatureId),

    /// An internal protocol or algorithm invariant failed. Always a bug.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by a failed internal check rather than by bad input.
    pub fn is_invariant(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
