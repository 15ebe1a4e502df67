//! Command-line harness around [`matconc_core`]: TOML run configuration,
//! CSV output, a trajectory-parallel runner, and the `boundary`,
//! `simulate`, `verify`, `tail`, and `oja` commands.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;
pub mod runner;

pub use config::{Overrides, Resolved, RunConfig};
pub use error::CliError;
