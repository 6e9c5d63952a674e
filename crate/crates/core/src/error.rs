use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Header { path: PathBuf, message: String },
    #[error("{}: data file holds {found} bytes, header implies {expected}", path.display())]
    LengthMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("non-finite sample at index {index} with no nodata declared")]
    NonFinite { index: usize },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("{location}: {message}")]
    Parse { location: String, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Computation,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Io { .. }
            | Error::Header { .. }
            | Error::LengthMismatch { .. }
            | Error::NonFinite { .. }
            | Error::Parse { .. }
            | Error::MissingArtifact(_) => ErrorKind::Io,
            Error::Geometry(_)
            | Error::GridMismatch(_)
            | Error::InvalidInput(_)
            | Error::Degenerate(_) => ErrorKind::Computation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
