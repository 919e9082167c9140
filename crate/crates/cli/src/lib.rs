//! Command implementations behind the `hydra` binary: synthetic data
//! generation, training, cross-validation, hyperparameter sweeps and report
//! export. Every command reads a [`config::RunConfig`] and writes its
//! resolved form next to its outputs.

pub mod args;
pub mod config;
pub mod error;
pub mod evaluate;
mod output;
pub mod report;
pub mod sweep;
pub mod synth;

pub use error::{exit, CliError, CliResult};
