//! Files, configuration and the `reif` command line on top of `reif-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod selftest;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use exec::Rayon;
