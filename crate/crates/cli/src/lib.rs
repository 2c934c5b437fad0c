//! Command-line driver for graphon Kuramoto experiments.

pub mod config;
pub mod error;
pub mod experiments;
pub mod shorthand;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, Result};
pub use experiments::{render, rerun, run, Manifest};
