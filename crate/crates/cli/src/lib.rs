//! Command-line driver: configuration, experiment commands and file outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{execute, Outcome};
pub use config::{parse_config, Overrides, RunConfig};
pub use error::CliError;
