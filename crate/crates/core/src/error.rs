use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by configuration loading, IO, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid preprocess pattern `{pattern}`: {source}")]
    InvalidPattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },

    #[error("preprocess replacement `{0}` must not contain whitespace")]
    ReplacementWhitespace(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("{path}:{line}: {message}")]
    GroundTruth {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("partition universes differ: {missing} id(s) only in truth {missing_sample:?}, {extra} id(s) only in prediction {extra_sample:?}")]
    UniverseMismatch {
        missing: usize,
        missing_sample: Vec<u64>,
        extra: usize,
        extra_sample: Vec<u64>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("snapshot: {0}")]
    Snapshot(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for usage/config problems, 2 for IO failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Stream(_) | Error::Csv(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
