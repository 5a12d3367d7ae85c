//! Command-line front end: config loading, subcommands and file artifacts.

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod plot;

pub use commands::{dispatch, Command, Options};
pub use config::{load_config, parse_config, RunConfig};
pub use error::{error_line, CliError};
