//! Crate-wide error type with process exit-code mapping.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad flags, incompatible architecture/dataset,
    /// malformed run-config files.
    #[error("config error: {0}")]
    Config(String),

    /// Data problems: missing or corrupt dataset files, unreadable or
    /// incompatible model containers.
    #[error("data error: {0}")]
    Data(String),

    /// Numerical failures: dimension mismatches, singular systems without
    /// fallback, non-finite values where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| Error::Io { context, source }
    }

    /// Process exit code: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io { .. } => 3,
            Error::Numeric(_) => 4,
        }
    }
}
