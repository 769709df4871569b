//! Library side of the `tomoinv` binary: run configuration and the
//! subcommand pipelines, usable from tests without spawning a process.

pub mod commands;
pub mod config;

pub use config::{RunArgs, RunConfig};
