use std::fmt;
use std::process::ExitCode;

use onofri_core::Error;

/// Why a command stopped, and which exit code that maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or an unreadable input file (exit 2).
    Usage(String),
    /// A computation failed or an invariant was violated (exit 1).
    Violation(String),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    pub fn violation(msg: impl Into<String>) -> Self {
        Failure::Violation(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(2),
            Failure::Violation(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Violation(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::LengthMismatch { .. }
            | Error::InsufficientGrid { .. }
            | Error::DegenerateMatrix(_)
            | Error::OrientationReversing => Failure::Usage(e.to_string()),
            _ => Failure::Violation(e.to_string()),
        }
    }
}
