//! Std companion of `circdet-core`: the CircleAnn annotation format, `.grid`
//! map files, JSON reports and the `circdet` command line.
//!
//! Every subcommand is a function in [`commands`] taking its parsed flags, so the
//! binary and library callers produce the same results.

pub mod circleann;
pub mod cli;
pub mod commands;
pub mod error;
pub mod fsio;
pub mod gridfile;
pub mod report;

pub use error::{CliError, Result};
