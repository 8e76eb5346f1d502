use std::io;

use thiserror::Error;

/// Errors produced by the quantization toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A file does not follow the expected on-disk layout.
    #[error("format error: {0}")]
    Format(String),

    /// A value cannot be represented in the requested encoding.
    #[error("value out of range: {0}")]
    Range(String),

    /// An input violates an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid parameters or configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unsupported index version {found} (supported: {supported:?})")]
    Version { found: u32, supported: Vec<u32> },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
