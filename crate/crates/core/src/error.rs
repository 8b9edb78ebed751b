use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{routine} did not converge: {detail}")]
    NonConvergence { routine: &'static str, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Config { .. } | Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
