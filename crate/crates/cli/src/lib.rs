//! File-level commands of the `dereverb` tool. The binary parses flags and
//! calls into [`commands`]; tests drive the same functions directly.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{ConfigLayer, PipelineConfig};
pub use error::CliError;
