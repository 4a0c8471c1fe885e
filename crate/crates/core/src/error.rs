use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An arithmetic precondition was violated (e.g. red time not inside the cycle).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    /// A simulated queue grew past the end of its approach link.
    #[error("queue spillback at intersection {intersection} approach {direction}: {detail}")]
    Spillback {
        intersection: String,
        direction: String,
        detail: String,
    },

    #[error("no ground truth for {0}")]
    MissingTarget(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("artifact {} was produced by a different configuration (hash {found}, expected {expected}); pass --overwrite to replace it", path.display())]
    StaleArtifact {
        path: PathBuf,
        found: String,
        expected: String,
    },

    #[error("unsupported format version {found} in {what} (expected {expected})")]
    Version {
        what: String,
        found: u32,
        expected: u32,
    },

    #[error("parse error in {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
