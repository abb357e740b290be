//! Configuration, presets and experiment runner behind the `noisesync`
//! command.

pub mod config;
pub mod experiments;
pub mod output;
pub mod presets;

use thiserror::Error;

pub use config::ExperimentConfig;

/// Environment variable that overrides the output root.
pub const OUTPUT_ROOT_ENV: &str = "NOISESYNC_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Checkpoint(_) => 3,
        }
    }
}

impl From<noisesync::Error> for CliError {
    fn from(e: noisesync::Error) -> Self {
        match e {
            noisesync::Error::Checkpoint(m) => CliError::Checkpoint(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
