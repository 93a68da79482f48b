//! Command-line driver: configuration, repeated experiments and their outputs.

pub mod config;
pub mod experiment;

pub use config::{DatasetSource, ExperimentConfig, ShapSettings};
pub use experiment::{run_experiment, ExperimentResult, Summary};
