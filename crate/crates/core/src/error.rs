use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: u64,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("unknown dataset key `{0}`")]
    UnknownDataset(String),

    #[error("failed to download {url}: {message}")]
    Network { url: String, message: String },

    #[error("checksum mismatch for `{key}`: expected {expected}, got {actual}")]
    Checksum {
        key: String,
        expected: String,
        actual: String,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid genotype: {0}")]
    InvalidGenotype(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("objective evaluation failed at generation {generation}, member {member}: {message}")]
    Objective {
        generation: usize,
        member: usize,
        message: String,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
