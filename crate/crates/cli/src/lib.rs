//! Configuration-driven SER experiments, figure reproduction and property
//! verification on top of the `msep` library.

pub mod config;
pub mod figure;
pub mod output;
pub mod verify;

use std::fmt;

/// Why a command did not succeed. Each kind maps to one exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Bad input: unreadable or invalid configuration, unknown names.
    Invalid(String),
    /// The command ran but failed: a property or a reference check did not
    /// hold, or the library returned an error.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

impl From<msep::Error> for Failure {
    fn from(e: msep::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}
