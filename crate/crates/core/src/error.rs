//! Toolkit-wide error type.
//!
//! Variants are grouped by who is at fault: `Param` for bad arguments or
//! configuration, `Data`/`Parse`/`Format`/`Io` for unusable inputs, and
//! `Internal` for violated invariants that indicate a bug in this crate.
//! The CLI maps these onto its exit codes (2 / 3 / 4 respectively).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value is out of range or inconsistent.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Input data is malformed, inconsistent, or unusable (wrong shape,
    /// non-finite values, missing columns, undefined metric, ...).
    #[error("bad data: {0}")]
    Data(String),

    /// A text input failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A binary container is damaged: bad magic, truncation, checksum
    /// mismatch, unknown version or tag.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// An internal invariant was violated. Reaching this is a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
