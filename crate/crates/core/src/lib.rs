//! Surrogate-guided black-box optimization for simulation calibration.
//!
//! The crate provides Gaussian-process Bayesian optimization, trust-region
//! variants with one or several regions, a memory-guided variant that restarts
//! collapsed regions from remembered basins, and GA / random-search baselines.
//! All optimizers share one budgeted evaluation history and are deterministic
//! given a [`RunSeed`].

pub mod acquisition;
pub mod baselines;
pub mod candidates;
pub mod error;
pub mod memory;
pub mod objectives;
pub mod run;
mod sobol_table;
pub mod space;
pub mod surrogate;
pub mod trust;

pub use error::{Error, Result};
pub use objectives::{Evaluation, Objective, ObjectiveError};
pub use run::{Method, NoopObserver, RestartEvent, RestartKind, RunFailure, RunObserver, RunResult};
pub use space::{EvaluationRecord, History, Phase, RunSeed, SearchSpace};
