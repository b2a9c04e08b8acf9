//! Config parsing, model files and subcommands of the `brnsim` tool.

pub mod config;
pub mod error;
pub mod manifest;
pub mod model;
pub mod run;

pub use config::{parse_config, ExperimentConfig};
pub use error::{CliError, FieldError, ParseError};
pub use manifest::RunManifest;
pub use run::{run, RunOptions, Subcommand};
