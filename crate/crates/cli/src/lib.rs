//! Experiment pipeline around `dppl-core`: JSON-lines datasets, labeling,
//! training, evaluation, benchmarking and the saturation sweep.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
