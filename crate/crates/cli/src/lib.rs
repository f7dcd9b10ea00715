//! Configuration parsing, experiment orchestration, CSV and SVG output, and
//! the invariant-audit runner behind the `cgb` binary.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod plot;

pub use error::{CliError, CliResult};
