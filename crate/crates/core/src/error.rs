use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Error classes shared by every module.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is out of its documented domain.
    InvalidArgument(String),
    /// Input contained nothing to process.
    EmptyInput(String),
    /// The request is well-formed but not supported (e.g. upsampling).
    Unsupported(String),
    /// The request exceeds a resource cap.
    ResourceLimit(String),
    /// An internal invariant was violated. Reaching this is a bug.
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn empty(msg: impl Into<String>) -> Self {
        Error::EmptyInput(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::EmptyInput(m) => write!(f, "empty input: {m}"),
            Error::Unsupported(m) => write!(f, "unsupported operation: {m}"),
            Error::ResourceLimit(m) => write!(f, "resource limit exceeded: {m}"),
            Error::Internal(m) => write!(f, "internal invariant violated: {m}"),
        }
    }
}

impl core::error::Error for Error {}
