//! Batch front end: problem configs, solver runs, artifacts, ray-trace
//! validation and the invariant suites.

pub mod artifacts;
pub mod commands;
pub mod config;

use std::fmt;

/// Success.
pub const EXIT_OK: i32 = 0;
/// Usage or input error.
pub const EXIT_INPUT: i32 = 1;
/// The solver stopped before reaching its tolerance.
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<lumen::Error> for CliError {
    fn from(e: lumen::Error) -> Self {
        Self::input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}
