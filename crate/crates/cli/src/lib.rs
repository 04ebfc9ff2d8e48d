//! Batch experiment driver: configuration, runners and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod commands;
pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiment::run_experiment;
pub use output::{ExperimentOutput, Table};
