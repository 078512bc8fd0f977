//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid physical specification or configuration value.
    #[error("invalid specification: {0}")]
    Spec(String),

    /// Configuration file could not be read or parsed.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical routine failed to converge or violated a tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A compilation step failed (non-unitary input, disconnected graph, ...).
    #[error("compilation error: {0}")]
    Compile(String),

    /// File I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code associated with this error kind.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Spec(_) | Error::Config(_) | Error::Compile(_) => 2,
            Error::Numerical(_) => 3,
            Error::Io(_) => 2,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
