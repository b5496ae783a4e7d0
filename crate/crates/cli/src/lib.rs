//! Command-line orchestration of the active-diffusion engine: data
//! generation, training, sampling, evaluation and theory tables.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::CommandOptions;
pub use config::RunConfig;
pub use error::CliError;
