use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the planning toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration outside joint limits: {0}")]
    OutOfLimits(String),
    #[error("unsupported kinematic chain: {0}")]
    UnsupportedChain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("scene generation failed: {0}")]
    Generation(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
