//! Exit-code classification.
//!
//! | code | meaning                                  |
//! |------|------------------------------------------|
//! | 0    | success                                  |
//! | 1    | usage error (bad flag, config or value)  |
//! | 2    | I/O or input-data error                  |
//! | 3    | external encoder failure                 |

use std::fmt;

pub const OK: u8 = 0;
pub const USAGE: u8 = 1;
pub const IO: u8 = 2;
pub const ENCODER: u8 = 3;

/// A problem with the command line or configuration values.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// An external encoder or decoder could not be run or exited non-zero.
#[derive(Debug)]
pub struct EncoderError(pub String);

impl fmt::Display for EncoderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for EncoderError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Maps an error chain to an exit code.
pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return USAGE;
        }
        if cause.is::<EncoderError>() {
            return ENCODER;
        }
        if let Some(e) = cause.downcast_ref::<roiquant_core::Error>() {
            return match e {
                roiquant_core::Error::Config(_) | roiquant_core::Error::InvalidQuality(_) => USAGE,
                _ => IO,
            };
        }
        if cause.is::<toml::de::Error>() {
            return USAGE;
        }
    }
    IO
}
