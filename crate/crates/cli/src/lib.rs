//! Command-line front end: dataset files, TOML configuration, checkpoints and
//! the experiment commands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;

pub use error::{CliError, CliResult};
