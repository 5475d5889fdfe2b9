use std::fmt;

/// Errors from laboratory operations.
///
/// `Domain` marks a violated precondition, `Budget` an exhausted compute
/// budget where not even a partial result exists. Operations that can
/// salvage partial results return them with a `partial` flag instead of
/// an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A precondition was violated; the message names it.
    Domain(String),
    /// A compute budget was exhausted before anything was produced.
    Budget(String),
    /// An operation needs exact rational inputs but got floats.
    ExactRequired(String),
    /// I/O failure while writing a report.
    Io(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn budget(msg: impl Into<String>) -> Self {
        Error::Budget(msg.into())
    }

    /// Process exit code for the CLI: 2 for precondition violations,
    /// 3 for budget exhaustion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::ExactRequired(_) => 2,
            Error::Budget(_) => 3,
            Error::Io(_) => 2,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "precondition violated: {msg}"),
            Error::Budget(msg) => write!(f, "budget exhausted: {msg}"),
            Error::ExactRequired(msg) => {
                write!(f, "exact rational input required: {msg}")
            }
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
