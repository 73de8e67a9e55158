//! Experiment runner and trace analysis for the `mgturbo` optimizers.
//!
//! `run` writes one directory per seed containing `trace.csv`,
//! `restarts.csv`, `basins.json` and `summary.json`, plus a seed-matrix
//! `summary.json`. `compare` and `pca` read those directories back.

pub mod compare;
pub mod config;
pub mod error;
pub mod pca;
pub mod problem;
pub mod run;
pub mod trace;

pub use error::{CliError, Result};
