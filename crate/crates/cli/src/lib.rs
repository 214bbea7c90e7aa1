//! Command-line front end: run configuration, experiment presets, and
//! CSV/JSON artifact emission for the constrained-inference library.

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration (parse failure or invalid field). Exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// Unknown preset name. Exit code 2.
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    /// Numerical failure inside a run. Exit code 1.
    #[error("numerical failure: {0}")]
    Numeric(#[from] softcon_core::Error),

    /// Filesystem failure. Exit code 1.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::UnknownPreset(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 1,
        }
    }
}
