use thiserror::Error;

use crate::objectives::ObjectiveError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("coordinate {index} = {value} lies outside [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("evaluation {eval_index}: non-finite objective value {value}")]
    NonFiniteValue { eval_index: usize, value: f64 },

    #[error("evaluation index {actual} out of sequence (expected {expected})")]
    OutOfSequence { expected: usize, actual: usize },

    #[error("history is full: budget of {budget} evaluations already used")]
    BudgetExhausted { budget: usize },

    #[error("surrogate needs at least 2 distinct points, got {0}")]
    InsufficientData(usize),

    #[error("ill-conditioned data: factorization failed even with jitter {jitter:e}")]
    IllConditioned { jitter: f64 },

    #[error("sobol dimension {dim} exceeds the {max}-dimension direction-number table")]
    SobolDimension { dim: usize, max: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("evaluation {eval_index} failed: {source}")]
    Objective {
        eval_index: usize,
        #[source]
        source: ObjectiveError,
    },
}
