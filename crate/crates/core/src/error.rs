use std::io;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// I/O failure while reading or writing an asset.
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    /// A file does not match its declared format.
    #[error("format error: {0}")]
    Format(String),
    /// Structurally valid input carrying bad data (NaN fields, cycles, ...).
    #[error("data error at record {index}: {what}")]
    Data { index: usize, what: String },
    /// A wire message or payload could not be decoded.
    #[error("protocol error at byte {offset}: {what}")]
    Protocol { offset: usize, what: String },
    /// An API precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub fn format(what: impl Into<String>) -> Self {
        Error::Format(what.into())
    }

    pub fn data(index: usize, what: impl Into<String>) -> Self {
        Error::Data {
            index,
            what: what.into(),
        }
    }

    pub fn protocol(offset: usize, what: impl Into<String>) -> Self {
        Error::Protocol {
            offset,
            what: what.into(),
        }
    }

    pub fn contract(what: impl Into<String>) -> Self {
        Error::Contract(what.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
