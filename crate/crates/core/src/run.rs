//! Run results, observers, and budgeted evaluation shared by all optimizers.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::AcquisitionStrategy;
use crate::candidates::TrustBox;
use crate::error::{Error, Result};
use crate::memory::BasinSnapshot;
use crate::objectives::{Objective, ObjectiveError};
use crate::space::{EvaluationRecord, History, Phase, SearchSpace};
use crate::trust::TrustRegionState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartKind {
    Random,
    MemoryBasin,
    GlobalBest,
}

impl RestartKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::MemoryBasin => "memory_basin",
            Self::GlobalBest => "global_best",
        }
    }
}

impl fmt::Display for RestartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartEvent {
    /// Evaluation whose outcome collapsed the region.
    pub eval_index: usize,
    pub region_id: usize,
    pub kind: RestartKind,
    /// New region center in normalized coordinates.
    pub center: Vec<f64>,
    pub basin_id: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bo,
    Turbo,
    MultiTurbo,
    MgTurbo,
    Ga,
    Random,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Bo,
        Method::Turbo,
        Method::MultiTurbo,
        Method::MgTurbo,
        Method::Ga,
        Method::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bo => "bo",
            Self::Turbo => "turbo",
            Self::MultiTurbo => "multi_turbo",
            Self::MgTurbo => "mg_turbo",
            Self::Ga => "ga",
            Self::Random => "random",
        }
    }

    /// Whether the method uses a surrogate and an acquisition strategy.
    pub fn uses_acquisition(self) -> bool {
        !matches!(self, Self::Ga | Self::Random)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown method '{s}' (expected bo, turbo, multi_turbo, mg_turbo, ga or random)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub method: Method,
    pub acquisition: Option<AcquisitionStrategy>,
    pub seed: u64,
    pub budget: usize,
    pub init_size: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub history: History,
    pub best_x_raw: Vec<f64>,
    pub best_y: f64,
    pub restart_events: Vec<RestartEvent>,
    pub snapshots: Vec<BasinSnapshot>,
    pub metadata: RunMetadata,
}

impl RunResult {
    pub fn restart_counts(&self) -> BTreeMap<RestartKind, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.restart_events {
            *counts.entry(e.kind).or_insert(0) += 1;
        }
        counts
    }
}

/// A run that stopped early; carries everything recorded before the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct RunFailure {
    #[source]
    pub error: Error,
    pub history: History,
    pub restart_events: Vec<RestartEvent>,
}

/// Hooks for streaming run progress.
pub trait RunObserver {
    fn on_record(&mut self, _record: &EvaluationRecord, _x_raw: &[f64]) {}
    fn on_restart(&mut self, _event: &RestartEvent) {}
    fn on_snapshot(&mut self, _snapshot: &BasinSnapshot) {}
    /// A trust region proposed `x_norm` from candidates inside `tr_box`.
    fn on_proposal(&mut self, _region: &TrustRegionState, _tr_box: &TrustBox, _x_norm: &[f64]) {}
}

pub struct NoopObserver;

impl RunObserver for NoopObserver {}

/// Evaluates points against a budgeted history and notifies the observer.
pub(crate) struct Evaluator<'a> {
    objective: &'a dyn Objective,
    space: &'a SearchSpace,
    observer: &'a mut dyn RunObserver,
    parallel: bool,
    pub history: History,
    pub restarts: Vec<RestartEvent>,
    pub snapshots: Vec<BasinSnapshot>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        objective: &'a dyn Objective,
        space: &'a SearchSpace,
        budget: usize,
        parallel: bool,
        observer: &'a mut dyn RunObserver,
    ) -> Self {
        Self {
            objective,
            space,
            observer,
            parallel,
            history: History::with_budget(budget),
            restarts: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    pub fn space(&self) -> &SearchSpace {
        self.space
    }

    pub fn observer(&mut self) -> &mut dyn RunObserver {
        self.observer
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn push_restart(&mut self, event: RestartEvent) {
        self.observer.on_restart(&event);
        self.restarts.push(event);
    }

    pub fn push_snapshot(&mut self, snapshot: BasinSnapshot) {
        self.observer.on_snapshot(&snapshot);
        self.snapshots.push(snapshot);
    }

    /// Evaluates `points` (normalized) and records them in order. With
    /// `parallel`, objective calls run concurrently; recording order is
    /// unchanged and stops at the first failure.
    pub fn evaluate_batch(&mut self, points: &[(Vec<f64>, Option<usize>)], phase: Phase) -> Result<Vec<f64>> {
        let raws = points
            .iter()
            .map(|(x, _)| self.space.denormalize(x))
            .collect::<Result<Vec<_>>>()?;
        let objective = self.objective;
        let outcomes: Vec<std::result::Result<_, ObjectiveError>> = if self.parallel && raws.len() > 1 {
            std::thread::scope(|s| {
                let handles: Vec<_> = raws
                    .iter()
                    .map(|x| s.spawn(move || objective.evaluate(x)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("objective evaluation panicked"))
                    .collect()
            })
        } else {
            raws.iter().map(|x| objective.evaluate(x)).collect()
        };

        let mut ys = Vec::with_capacity(points.len());
        for (((x_norm, region), raw), outcome) in points.iter().zip(&raws).zip(outcomes) {
            let eval_index = self.history.len() + 1;
            let eval = outcome.map_err(|source| Error::Objective { eval_index, source })?;
            let record = EvaluationRecord {
                x_norm: x_norm.clone(),
                y: eval.value,
                eval_index,
                region_id: *region,
                phase,
                compliance: eval.compliance,
            };
            self.history.record(record)?;
            let rec = self.history.records().last().expect("just recorded");
            self.observer.on_record(rec, raw);
            ys.push(eval.value);
        }
        Ok(ys)
    }

    pub fn finish(self, metadata: RunMetadata) -> std::result::Result<RunResult, RunFailure> {
        let best = match self.history.best() {
            Some(b) => b.clone(),
            None => {
                return Err(RunFailure {
                    error: Error::InsufficientData(0),
                    history: self.history,
                    restart_events: self.restarts,
                })
            }
        };
        let best_x_raw = match self.space.denormalize(&best.x_norm) {
            Ok(x) => x,
            Err(error) => {
                return Err(RunFailure {
                    error,
                    history: self.history,
                    restart_events: self.restarts,
                })
            }
        };
        Ok(RunResult {
            history: self.history,
            best_x_raw,
            best_y: best.y,
            restart_events: self.restarts,
            snapshots: self.snapshots,
            metadata,
        })
    }

    pub fn fail(self, error: Error) -> RunFailure {
        RunFailure {
            error,
            history: self.history,
            restart_events: self.restarts,
        }
    }
}

/// A failure before any evaluation took place.
pub(crate) fn config_failure(error: Error) -> RunFailure {
    RunFailure {
        error,
        history: History::new(),
        restart_events: Vec::new(),
    }
}
