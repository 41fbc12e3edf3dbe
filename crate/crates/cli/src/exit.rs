use std::fmt;

use spikelab::Error;

pub const STATISTICAL: u8 = 1;
pub const CRITICAL: u8 = 2;
pub const USAGE: u8 = 64;
pub const DATA: u8 = 65;
pub const NO_INPUT: u8 = 66;
pub const INTERNAL: u8 = 70;
pub const IO: u8 = 74;

/// A failed command together with its exit code.
#[derive(Debug)]
pub enum Failure {
    Critical(String),
    Usage(String),
    Data(String),
    NoInput(String),
    Internal(String),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Critical(_) => CRITICAL,
            Failure::Usage(_) => USAGE,
            Failure::Data(_) => DATA,
            Failure::NoInput(_) => NO_INPUT,
            Failure::Internal(_) => INTERNAL,
            Failure::Io(_) => IO,
        }
    }

    /// Parameter errors are the caller's fault; anything else raised while
    /// computing is internal.
    pub fn from_core(e: Error) -> Self {
        match e {
            Error::CriticalInterval { .. } => Failure::Critical(e.to_string()),
            Error::InvalidParameter(_)
            | Error::Dimension(_)
            | Error::TooFewReplications { .. }
            | Error::Precondition(_)
            | Error::Unsupported(_)
            | Error::InsideSupport { .. }
            | Error::Singularity { .. } => Failure::Usage(e.to_string()),
            Error::Io(m) => Failure::Io(m),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            Failure::Critical(m) => ("critical interval", m),
            Failure::Usage(m) => ("usage", m),
            Failure::Data(m) => ("data", m),
            Failure::NoInput(m) => ("input", m),
            Failure::Internal(m) => ("internal", m),
            Failure::Io(m) => ("output", m),
        };
        write!(f, "{kind} error: {msg}")
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from_core(e)
    }
}
