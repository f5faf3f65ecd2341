//! Experiment harness: TOML configs, dataset directories, training sweeps
//! over learning rates, evaluation, saliency and gradient checks. Every CSV
//! artifact starts with the config hash and is reproducible byte for byte.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
