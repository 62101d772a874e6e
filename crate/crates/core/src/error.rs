use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the pitchlines library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported or malformed image {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("no chain pixel lies at least one pixel inside the image border")]
    EmptyChain,
    #[error("schema error at line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("record index {index} out of range (session has {len} records)")]
    Index { index: usize, len: usize },
    #[error("invalid label {0:?}; expected one of field_line, field_boundary, none")]
    InvalidLabel(String),
    #[error("record {0} has no human label")]
    UnlabeledRecord(usize),
    #[error("training set has no positive labels for reference {0}")]
    NoPositives(String),
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
