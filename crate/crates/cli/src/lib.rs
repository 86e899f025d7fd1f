//! Command-line front end: `speed`, `zeros`, `profile`, `verify` and
//! `evolve`, driven by a [`config::RunConfig`].

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::RunConfig;
pub use error::CliError;
