// SPDX-License-Identifier: Apache-2.0

use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes. The CLI maps these to exit codes and the C ABI maps
/// them to status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorClass {
    Input,
    Config,
    Format,
    Corrupt,
    Domain,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u8, supported: u8 },

    #[error("truncated {section}: need {needed} bytes, {available} available")]
    Truncated {
        section: &'static str,
        needed: u64,
        available: u64,
    },

    #[error("length mismatch in {section}: expected {expected} bytes, found {found}")]
    LengthMismatch {
        section: &'static str,
        expected: u64,
        found: u64,
    },

    #[error("malformed header field {field}: {detail}")]
    BadField { field: &'static str, detail: String },

    #[error("corrupt escape stream in chunk {chunk}: {detail}")]
    CorruptChunk { chunk: usize, detail: String },

    #[error("corrupt stream: {0}")]
    Corrupt(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::EmptyInput(_) | Error::InvalidInput(_) => ErrorClass::Input,
            Error::Config(_) => ErrorClass::Config,
            Error::BadMagic { .. }
            | Error::UnsupportedVersion { .. }
            | Error::Truncated { .. }
            | Error::LengthMismatch { .. }
            | Error::BadField { .. } => ErrorClass::Format,
            Error::CorruptChunk { .. } | Error::Corrupt(_) => ErrorClass::Corrupt,
            Error::Domain(_) => ErrorClass::Domain,
            Error::Io(_) => ErrorClass::Io,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::Corrupt(msg.into())
    }

    pub(crate) fn chunk(chunk: usize, detail: impl Into<String>) -> Self {
        Error::CorruptChunk {
            chunk,
            detail: detail.into(),
        }
    }
}
