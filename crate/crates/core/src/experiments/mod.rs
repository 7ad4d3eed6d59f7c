//! Config-driven experiment runner behind the command-line tool.

pub mod config;
pub mod output;
pub mod plot;
pub mod runner;
pub mod scenarios;

pub use config::{Scenario, SchemaError};
pub use runner::{execute, run, Command, RunOptions};
