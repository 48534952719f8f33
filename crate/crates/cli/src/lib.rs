//! Command-line front end of the `dlcz-repeater` models.
//!
//! The `dlcz` binary wraps the modules here; they are exposed so that
//! configurations can be built and checked from tests and scripts.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::RunConfig;
pub use error::CliError;
