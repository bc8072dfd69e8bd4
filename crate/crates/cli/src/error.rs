use std::path::Path;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, flags or input files.
    #[error("{0}")]
    Validation(String),
    /// I/O failures and numerical breakdowns.
    #[error("{0}")]
    Runtime(String),
    /// A `--assert-trends` check failed.
    #[error("{0}")]
    Assertion(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Assertion(_) => 3,
        })
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }

    pub fn parse(path: &Path, msg: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{}: {msg}", path.display()))
    }
}

impl From<mcwd_core::Error> for CliError {
    fn from(e: mcwd_core::Error) -> Self {
        use mcwd_core::Error as E;
        match e {
            E::ZeroSignal | E::DegenerateFrequencies(_) | E::DegenerateRegression(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
