//! Experiment driver behind the `zdq` binary.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::Context;
pub use config::ExperimentConfig;
pub use error::CliError;
