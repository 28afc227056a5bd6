//! Command-line front end for `ccc-core`: configuration, training pools,
//! run directories and the CSV/JSON files written into them.

pub mod cli;
pub mod commands;
pub mod config;
pub mod envs;
pub mod error;
pub mod output;
pub mod pool;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
