//! Experiment harness for the `lockdown` library: configuration, the
//! experiments behind each subcommand, and their CSV/JSON outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{ConfigLayer, RunConfig};
pub use error::{CliError, CliResult};
