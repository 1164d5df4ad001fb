//! Command implementations behind the `fockforge` binary.
//!
//! Every command returns a JSON report that embeds the resolved
//! configuration. Wigner grids and sweeps additionally write CSV files.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::run;
pub use config::{Command, FileConfig, Model, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Compute(fockforge::Error),
}

impl From<fockforge::Error> for CliError {
    fn from(e: fockforge::Error) -> Self {
        use fockforge::Error as E;
        match e {
            E::Config(_) | E::Unstable { .. } | E::DimMismatch(_) | E::GridTooNarrow { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Compute(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Compute(_) => 1,
        }
    }
}
