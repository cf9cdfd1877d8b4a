use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition of a public operation was not met (bad shape, empty set, value out of range).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A computation produced or received NaN/Inf, or an iterative solver did not converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

/// Load/parse failures for the on-disk formats. Every variant carries enough
/// location information to find the offending byte or line.
#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("truncated payload while reading {what} at byte offset {offset}")]
    Truncated { what: &'static str, offset: usize },

    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: usize },

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("empty id at position {0}")]
    EmptyId(usize),

    #[error("invalid UTF-8 in id at position {0}")]
    InvalidUtf8(usize),

    #[error("invalid header: {0}")]
    InvalidHeader(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
}
