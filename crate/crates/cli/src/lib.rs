//! Command-line front end over the simulation library.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

/// Failure classes with stable process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration. Exit code 1.
    Validation(String),
    /// A run or I/O operation failed. Exit code 2.
    Runtime(String),
    /// A property suite reported a violation. Exit code 3.
    PropertyFailure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::PropertyFailure(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
            CliError::PropertyFailure(m) => write!(f, "property failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<robust_online::Error> for CliError {
    fn from(e: robust_online::Error) -> Self {
        use robust_online::Error as E;
        match e {
            E::RunFailed { .. } | E::EmptySurvivors { .. } | E::ObservationOutOfRange { .. } => {
                CliError::Runtime(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
