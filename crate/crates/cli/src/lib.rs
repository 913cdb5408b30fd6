//! Experiment harnesses, dataset files and the `scenesmc` command line.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod io;
pub mod rng;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
