use std::path::PathBuf;

use crate::grid::Node;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },

    #[error("invalid design: {0}")]
    Validation(String),

    #[error("infeasible design config: {0}")]
    InfeasibleConfig(String),

    #[error("net {net} is unroutable: no path reaches pin {pin:?}")]
    Unroutable { net: String, pin: Node },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite {what} at training step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
