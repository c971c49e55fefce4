//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
///
/// The CLI maps these onto process exit codes: configuration problems
/// (`Domain`, `Argument`, `Parse`, `Config`) exit with 2, I/O failures with 3,
/// and missing or malformed pipeline inputs (`Precondition`, `Format`) with 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical argument is outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument violates a documented precondition (shape, range, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Line-oriented text (config, CSV) failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A configuration is syntactically valid but semantically inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A binary file does not match its expected format.
    #[error("format error: {0}")]
    Format(String),

    /// A pipeline stage was invoked before its inputs exist.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
