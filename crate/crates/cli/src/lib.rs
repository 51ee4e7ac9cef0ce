//! Batch driver for the finite-fuel game engine: strict key-value
//! configuration, deterministic subcommand dispatch, and CSV emission with a
//! run manifest.

pub mod config;
pub mod dispatch;

pub use config::{parse_config, ConfigError, RunConfig};
pub use dispatch::{dispatch, DispatchReport};
