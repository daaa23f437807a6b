use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared by every layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Two shapes that had to agree did not. Both shapes are kept so the
    /// message always names them.
    #[error("dimension mismatch in {context}: {lhs:?} vs {rhs:?}")]
    DimMismatch {
        context: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("cannot split {channels} channels into {groups} equal groups")]
    InvalidSplit { channels: usize, groups: usize },

    #[error("softmax row {row} is fully masked")]
    DegenerateRow { row: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed file contents; `offset` is the byte position that failed.
    #[error("{}: {message} at byte {offset}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("dense oracle refuses {elements} elements (cap {cap})")]
    OracleTooLarge { elements: usize, cap: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(context: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::DimMismatch {
            context,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            message: message.into(),
        }
    }
}
