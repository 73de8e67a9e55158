//! GEH statistic and network-level count metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Conventional link-level acceptance threshold.
pub const GEH_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GehError {
    #[error("count {index}: GEH undefined when simulated and observed counts are both zero")]
    ZeroTotal { index: usize },
    #[error("count {index}: invalid count {value} (must be finite and non-negative)")]
    InvalidCount { index: usize, value: f64 },
    #[error("count vectors differ in length: simulated {sim}, observed {obs}")]
    LengthMismatch { sim: usize, obs: usize },
    #[error("count vector is empty")]
    Empty,
}

/// Non-negative traffic counts, one per measurement location and interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CountVector(Vec<f64>);

impl CountVector {
    pub fn new(counts: Vec<f64>) -> Result<Self, GehError> {
        if counts.is_empty() {
            return Err(GehError::Empty);
        }
        if let Some((index, &value)) = counts
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(GehError::InvalidCount { index, value });
        }
        Ok(Self(counts))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for CountVector {
    type Error = GehError;

    fn try_from(v: Vec<f64>) -> Result<Self, GehError> {
        Self::new(v)
    }
}

impl From<CountVector> for Vec<f64> {
    fn from(c: CountVector) -> Self {
        c.0
    }
}

/// `sqrt(2 (s - o)^2 / (s + o))`.
pub fn geh(simulated: f64, observed: f64) -> Result<f64, GehError> {
    geh_at(0, simulated, observed)
}

fn geh_at(index: usize, s: f64, o: f64) -> Result<f64, GehError> {
    for value in [s, o] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(GehError::InvalidCount { index, value });
        }
    }
    if s + o == 0.0 {
        return Err(GehError::ZeroTotal { index });
    }
    Ok((2.0 * (s - o) * (s - o) / (s + o)).sqrt())
}

/// Per-index GEH values.
pub fn geh_values(sim: &CountVector, obs: &CountVector) -> Result<Vec<f64>, GehError> {
    if sim.len() != obs.len() {
        return Err(GehError::LengthMismatch {
            sim: sim.len(),
            obs: obs.len(),
        });
    }
    sim.0
        .iter()
        .zip(&obs.0)
        .enumerate()
        .map(|(i, (&s, &o))| geh_at(i, s, o))
        .collect()
}

/// Mean GEH over all count comparisons (the calibration objective).
pub fn mean_geh(sim: &CountVector, obs: &CountVector) -> Result<f64, GehError> {
    let values = geh_values(sim, obs)?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Fraction of indices with GEH at or below `threshold`.
pub fn compliance_fraction(
    sim: &CountVector,
    obs: &CountVector,
    threshold: f64,
) -> Result<f64, GehError> {
    let values = geh_values(sim, obs)?;
    Ok(fraction_within(&values, threshold))
}

pub(crate) fn fraction_within(values: &[f64], threshold: f64) -> f64 {
    values.iter().filter(|&&g| g <= threshold).count() as f64 / values.len() as f64
}
