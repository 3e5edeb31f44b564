//! Experiment harness: configuration, the `train`, `al`, `grid` and
//! `significance` commands, and the results CSV format.

pub mod commands;
pub mod config;
pub mod error;
pub mod results;

pub use commands::{run, Command};
pub use config::ExperimentConfig;
pub use error::{exit, CliError};
pub use results::{read_results_csv, write_results_csv, ResultsRow};
