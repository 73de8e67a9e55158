//! Objective functions and the evaluation contract shared by all optimizers.

mod external;
mod geh;
mod standard;
mod synthetic;

use thiserror::Error;

pub use external::{ExternalMode, ExternalObjective, ExternalObjectiveConfig};
pub use geh::{
    compliance_fraction, geh, geh_values, mean_geh, CountVector, GehError, GEH_THRESHOLD,
};
pub use standard::{StandardFunction, StandardKind};
pub use synthetic::{ResponseKind, SyntheticCalibration, SyntheticSpec};

/// Result of one objective call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// GEH compliance fraction, when the objective compares traffic counts.
    pub compliance: Option<f64>,
}

impl From<f64> for Evaluation {
    fn from(value: f64) -> Self {
        Self {
            value,
            compliance: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("timed out after {seconds} s")]
    Timeout { seconds: f64 },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("process closed its output without a response line")]
    NoResponse,
    #[error("process exited with status {code:?}: {stderr}")]
    NonzeroExit { code: Option<i32>, stderr: String },
    #[error("non-finite objective value {0}")]
    NonFinite(f64),
    #[error("failed to run objective process: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geh(#[from] GehError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// A deterministic black-box objective over raw parameter vectors.
///
/// Implementations must be pure: the same input always yields the same
/// output, and independent calls may run concurrently.
pub trait Objective: Sync {
    fn evaluate(&self, x_raw: &[f64]) -> Result<Evaluation, ObjectiveError>;
}

/// Wraps a plain function as an objective.
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, x_raw: &[f64]) -> Result<Evaluation, ObjectiveError> {
        Ok((self.0)(x_raw).into())
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn evaluate(&self, x_raw: &[f64]) -> Result<Evaluation, ObjectiveError> {
        (**self).evaluate(x_raw)
    }
}

impl<T: Objective + ?Sized + Send> Objective for Box<T> {
    fn evaluate(&self, x_raw: &[f64]) -> Result<Evaluation, ObjectiveError> {
        (**self).evaluate(x_raw)
    }
}
