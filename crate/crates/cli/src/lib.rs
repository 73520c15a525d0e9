//! Experiment driver for the `glsphere` toolkit: configuration, snapshot
//! files, versioned tables and the experiment commands.

pub mod config;
pub mod error;
pub mod experiments;
pub mod snapshot;
pub mod table;

pub use error::{CliError, Result};
