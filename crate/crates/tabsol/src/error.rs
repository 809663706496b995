//! Error type shared across the crate.
//!
//! Exit-code mapping for the CLI: configuration and input errors exit 2,
//! numeric failures exit 3, I/O failures exit 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad dimensions, out-of-range registers, unknown keys).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid runtime input (dimension mismatch, empty sequence, non-finite value).
    #[error("input error: {0}")]
    Input(String),

    /// Numerical failure (non-finite intermediate, SVD non-convergence).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) => 2,
            Error::Numeric(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
