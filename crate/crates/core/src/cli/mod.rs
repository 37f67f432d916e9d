//! Experiment driver: TOML config, subcommand implementations, and SVG
//! plotting for the `cpdflow` binary.

pub mod commands;
pub mod config;
pub mod plot;

pub use config::{ExperimentConfig, RunManifest};
