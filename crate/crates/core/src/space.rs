//! Search space, evaluation history and seeded random streams.
//!
//! Every optimizer works in the unit hypercube. `SearchSpace` converts between
//! raw calibration units and normalized coordinates, `History` is the
//! append-only evaluation log the surrogate trains on, and `RunSeed` derives
//! independent reproducible random streams for each consumer in a run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Box-constrained search space `lower_j <= x_j <= upper_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidSpace("dimension must be positive".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        for (j, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidSpace(format!(
                    "dimension {j}: lower bound {l} must be finite and below upper bound {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit hypercube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Maps raw coordinates into `[0, 1]^d`. Out-of-bounds inputs are rejected.
    pub fn normalize(&self, x_raw: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x_raw.len())?;
        x_raw
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let (l, u) = (self.lower[j], self.upper[j]);
                if !(l..=u).contains(&x) {
                    return Err(Error::OutOfBounds {
                        index: j,
                        value: x,
                        lower: l,
                        upper: u,
                    });
                }
                Ok((x - l) / (u - l))
            })
            .collect()
    }

    pub fn denormalize(&self, x_norm: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x_norm.len())?;
        x_norm
            .iter()
            .enumerate()
            .map(|(j, &z)| {
                if !(0.0..=1.0).contains(&z) {
                    return Err(Error::OutOfBounds {
                        index: j,
                        value: z,
                        lower: 0.0,
                        upper: 1.0,
                    });
                }
                let (l, u) = (self.lower[j], self.upper[j]);
                // Pin the endpoints so that 0 and 1 map exactly onto the bounds.
                Ok(if z == 1.0 { u } else { l + z * (u - l) })
            })
            .collect()
    }

    fn check_dim(&self, actual: usize) -> Result<()> {
        if actual != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Optimize,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Optimize => "optimize",
        }
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub x_norm: Vec<f64>,
    pub y: f64,
    /// 1-based position in the run.
    pub eval_index: usize,
    pub region_id: Option<usize>,
    pub phase: Phase,
    /// Fraction of count targets within the GEH threshold, for count-based objectives.
    pub compliance: Option<f64>,
}

/// Append-only evaluation log with a running incumbent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    records: Vec<EvaluationRecord>,
    best_index: Option<usize>,
    budget: Option<usize>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    /// A history that refuses to grow beyond `budget` records.
    pub fn with_budget(budget: usize) -> Self {
        Self {
            records: Vec::with_capacity(budget),
            best_index: None,
            budget: Some(budget),
        }
    }

    pub fn record(&mut self, rec: EvaluationRecord) -> Result<()> {
        let expected = self.records.len() + 1;
        if rec.eval_index != expected {
            return Err(Error::OutOfSequence {
                expected,
                actual: rec.eval_index,
            });
        }
        if !rec.y.is_finite() {
            return Err(Error::NonFiniteValue {
                eval_index: rec.eval_index,
                value: rec.y,
            });
        }
        if let Some(budget) = self.budget {
            if self.records.len() >= budget {
                return Err(Error::BudgetExhausted { budget });
            }
        }
        // Strict comparison: ties keep the earlier record.
        let improves = self.best().is_none_or(|best| rec.y < best.y);
        self.records.push(rec);
        if improves {
            self.best_index = Some(self.records.len() - 1);
        }
        Ok(())
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best_index(&self) -> Option<usize> {
        self.best_index
    }

    pub fn best(&self) -> Option<&EvaluationRecord> {
        self.best_index.map(|i| &self.records[i])
    }

    /// Running minimum of `y` after each evaluation.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.records
            .iter()
            .scan(f64::INFINITY, |best, r| {
                *best = best.min(r.y);
                Some(*best)
            })
            .collect()
    }
}

/// Seed plus sub-stream identifier; identical pairs yield identical streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunSeed {
    pub seed: u64,
    pub stream_id: u64,
}

impl RunSeed {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Derives an independent sub-stream labelled by `tag`.
    pub fn child(self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
