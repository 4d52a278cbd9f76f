use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("prefix too short: need {needed} bits, have {available}")]
    PrefixTooShort { needed: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("library is empty")]
    EmptyLibrary,

    #[error("search cap of {cap} exceeded while {context}")]
    CapExceeded { cap: u64, context: String },

    #[error("malformed enumeration: {0}")]
    MalformedEnumeration(String),

    #[error("bad descriptor: {0}")]
    Descriptor(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
