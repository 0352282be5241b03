//! Command-line front end: configuration, validation, subcommand drivers
//! and CSV output.

pub mod cli;
pub mod config;
pub mod error;
pub mod ini;
pub mod output;
pub mod run;

pub use cli::parse_and_validate;
pub use config::{Command, RunConfig};
pub use error::CliError;
