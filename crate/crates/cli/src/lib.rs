pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod files;

pub use config::{RunConfig, RunId, Seed};
pub use error::{CliError, Result};
