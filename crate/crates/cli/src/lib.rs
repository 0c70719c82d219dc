//! Scenario driver for the `mildhjb` library: TOML configuration, the `run`
//! and `diagnose` pipelines, and their output files.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

pub use config::ScenarioConfig;
pub use error::{CliError, Tag};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
