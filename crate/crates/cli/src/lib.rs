//! Scenario runner for netsync: TOML scenario files in, TOML reports and
//! long-format CSV out.

pub mod commands;
pub mod config;
pub mod error;

pub use config::ScenarioConfig;
pub use error::CliError;
