//! Command-line front end: run configuration, table I/O and the
//! `generate | ingest | fit | predict | report | bench` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::RunConfig;
pub use error::CliError;
