//! Command-line front end: configuration, commands and file output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command, Report};
pub use config::{parse_config, DesignKind, RawConfig, RunConfig};
pub use error::CliError;
