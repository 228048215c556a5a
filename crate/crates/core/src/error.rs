use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the decoding toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    #[error("frame {frame} is not normalized (probability mass {mass})")]
    Normalization { frame: usize, mass: f64 },

    #[error("duplicate symbol {symbol:?} on line {line}")]
    DuplicateSymbol { symbol: String, line: usize },

    #[error("capacity exceeded: {required} evaluations needed, cap is {cap}")]
    Capacity { required: u128, cap: u128 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("external LM protocol error: {0}")]
    Protocol(String),

    #[error("graph construction error: {0}")]
    Build(String),

    #[error("composition error: {0}")]
    Composition(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable class name, stable across releases.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Format { .. } => "format",
            Error::Normalization { .. } => "normalization",
            Error::DuplicateSymbol { .. } => "format",
            Error::Capacity { .. } => "capacity",
            Error::Unsupported(_) => "unsupported",
            Error::Config(_) => "config",
            Error::Protocol(_) => "protocol",
            Error::Build(_) => "build",
            Error::Composition(_) => "build",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
