use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{TrustRegionParams, TrustRegionState};
use crate::acquisition::{
    adaptive_select, beta_schedule, thompson_select, AcquisitionConfig, AcquisitionStrategy,
};
use crate::candidates::{
    region_box, region_candidates, sobol, BoxShape, CandidateSet,
    SobolEngine,
};
use crate::error::{Error, Result};
use crate::memory::{cluster_basins, select_restart, BasinConfig, BasinSnapshot};
use crate::objectives::Objective;
use crate::run::{
    config_failure, Evaluator, Method, RestartEvent, RestartKind, RunFailure, RunMetadata,
    RunObserver, RunResult,
};
use crate::space::{History, Phase, RunSeed, SearchSpace};
use crate::surrogate::{GpFitConfig, GpModel};

const INIT_STREAM: u64 = 1;
const FIT_STREAM: u64 = 2;
const CANDIDATE_STREAM: u64 = 3;
const SELECT_STREAM: u64 = 4;
const RESTART_STREAM: u64 = 5;
const CLUSTER_STREAM: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CandidateConfig {
    pub per_dim: usize,
    pub max: usize,
    /// Cap for Thompson sampling, whose joint draw is cubic in the set size.
    pub thompson_max: usize,
    pub box_shape: BoxShape,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self {
            per_dim: 100,
            max: 5000,
            thompson_max: 1024,
            box_shape: BoxShape::Ard,
        }
    }
}

impl CandidateConfig {
    pub fn count(&self, dim: usize, strategy: AcquisitionStrategy) -> usize {
        let n = (self.per_dim * dim).min(self.max);
        let n = match strategy {
            AcquisitionStrategy::Thompson => n.min(self.thompson_max),
            AcquisitionStrategy::Adaptive => n,
        };
        n.max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartPolicy {
    /// Next point of a seeded Sobol stream.
    Random,
    /// Best point of the highest-scoring remembered basin.
    Memory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub budget: usize,
    pub init_size: usize,
    pub acquisition: AcquisitionConfig,
    pub trust: TrustRegionParams,
    pub basin: BasinConfig,
    pub gp: GpFitConfig,
    pub candidates: CandidateConfig,
    /// Evaluate the proposals of one iteration concurrently.
    pub parallel: bool,
}

impl OptimizerConfig {
    pub fn new(budget: usize, init_size: usize, strategy: AcquisitionStrategy) -> Self {
        Self {
            budget,
            init_size,
            acquisition: AcquisitionConfig {
                strategy,
                ..AcquisitionConfig::default()
            },
            trust: TrustRegionParams::default(),
            basin: BasinConfig::default(),
            gp: GpFitConfig::default(),
            candidates: CandidateConfig::default(),
            parallel: false,
        }
    }

    fn validate(&self, regions: usize) -> Result<()> {
        if self.init_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "init_size must be >= 2, got {}",
                self.init_size
            )));
        }
        if self.budget <= self.init_size {
            return Err(Error::InvalidConfig(format!(
                "budget ({}) must exceed init_size ({})",
                self.budget, self.init_size
            )));
        }
        if regions > 1 && self.budget - self.init_size < regions {
            return Err(Error::InvalidConfig(format!(
                "budget - init_size ({}) must be >= number of regions ({regions})",
                self.budget - self.init_size
            )));
        }
        if self.gp.refit_every < 1 {
            return Err(Error::InvalidConfig("refit_every must be >= 1".into()));
        }
        self.acquisition.validate()?;
        self.trust.validate()?;
        self.basin.validate()
    }

    fn metadata(&self, method: Method, seed: RunSeed) -> RunMetadata {
        RunMetadata {
            method,
            acquisition: Some(self.acquisition.strategy),
            seed: seed.seed,
            budget: self.budget,
            init_size: self.init_size,
        }
    }
}

/// GP with periodic hyperparameter refits and refactorization in between.
struct Surrogate {
    config: GpFitConfig,
    seed: RunSeed,
    model: Option<GpModel>,
    fitted_at: usize,
}

impl Surrogate {
    fn new(config: GpFitConfig, seed: RunSeed) -> Self {
        Self {
            config,
            seed,
            model: None,
            fitted_at: 0,
        }
    }

    fn update(&mut self, history: &History) -> Result<&GpModel> {
        let n = history.len();
        let model = match &self.model {
            Some(m) if n - self.fitted_at < self.config.refit_every => m.refresh(history)?,
            previous => {
                let warm = previous.as_ref().map(|m| m.hyperparameters().clone());
                let m = GpModel::fit(history, self.seed.child(n as u64), &self.config, warm.as_ref())?;
                self.fitted_at = n;
                m
            }
        };
        Ok(self.model.insert(model))
    }
}

fn select(
    model: &GpModel,
    candidates: &CandidateSet,
    config: &OptimizerConfig,
    history: &History,
    seed: RunSeed,
) -> Result<usize> {
    match config.acquisition.strategy {
        AcquisitionStrategy::Thompson => thompson_select(model, candidates, seed),
        AcquisitionStrategy::Adaptive => {
            let posterior = model.posterior(&candidates.points)?;
            let best = history.best().ok_or(Error::InsufficientData(0))?.y;
            let f_star = model.standardize_y(best);
            let beta = beta_schedule(history.len(), config.init_size, config.budget, &config.acquisition)?;
            Ok(adaptive_select(&posterior, f_star, beta))
        }
    }
}

fn initial_design(ev: &mut Evaluator<'_>, config: &OptimizerConfig, seed: RunSeed) -> Result<()> {
    let dim = ev.space().dim();
    let design = sobol(config.init_size, dim, seed.child(INIT_STREAM))?;
    let batch: Vec<_> = design.points.into_iter().map(|x| (x, None)).collect();
    ev.evaluate_batch(&batch, Phase::Init)?;
    Ok(())
}

/// Standard GP optimization with global candidates.
pub fn run_bo(
    objective: &dyn Objective,
    space: &SearchSpace,
    config: &OptimizerConfig,
    seed: RunSeed,
    observer: &mut dyn RunObserver,
) -> std::result::Result<RunResult, RunFailure> {
    config.validate(1).map_err(config_failure)?;
    let mut ev = Evaluator::new(objective, space, config.budget, config.parallel, observer);
    match bo_loop(&mut ev, config, seed) {
        Ok(()) => ev.finish(config.metadata(Method::Bo, seed)),
        Err(e) => Err(ev.fail(e)),
    }
}

fn bo_loop(ev: &mut Evaluator<'_>, config: &OptimizerConfig, seed: RunSeed) -> Result<()> {
    initial_design(ev, config, seed)?;
    let dim = ev.space().dim();
    let count = config.candidates.count(dim, config.acquisition.strategy);
    let mut surrogate = Surrogate::new(config.gp, seed.child(FIT_STREAM));
    let mut iteration = 0u64;
    while ev.len() < config.budget {
        let model = surrogate.update(&ev.history)?;
        let candidates = sobol(count, dim, seed.child(CANDIDATE_STREAM).child(iteration))?;
        let idx = select(
            model,
            &candidates,
            config,
            &ev.history,
            seed.child(SELECT_STREAM).child(iteration),
        )?;
        let x = candidates.points[idx].clone();
        ev.evaluate_batch(&[(x, None)], Phase::Optimize)?;
        iteration += 1;
    }
    Ok(())
}

/// Single trust region with random restarts.
pub fn run_turbo(
    objective: &dyn Objective,
    space: &SearchSpace,
    config: &OptimizerConfig,
    seed: RunSeed,
    observer: &mut dyn RunObserver,
) -> std::result::Result<RunResult, RunFailure> {
    run_trust(objective, space, config, seed, observer, 1, RestartPolicy::Random, Method::Turbo)
}

/// `trust.num_regions` regions pooled into one history, random restarts.
pub fn run_multi_turbo(
    objective: &dyn Objective,
    space: &SearchSpace,
    config: &OptimizerConfig,
    seed: RunSeed,
    observer: &mut dyn RunObserver,
) -> std::result::Result<RunResult, RunFailure> {
    let m = config.trust.num_regions;
    run_trust(objective, space, config, seed, observer, m, RestartPolicy::Random, Method::MultiTurbo)
}

/// Multiple regions restarted from remembered basins.
pub fn run_mg_turbo(
    objective: &dyn Objective,
    space: &SearchSpace,
    config: &OptimizerConfig,
    seed: RunSeed,
    observer: &mut dyn RunObserver,
) -> std::result::Result<RunResult, RunFailure> {
    let m = config.trust.num_regions;
    run_trust(objective, space, config, seed, observer, m, RestartPolicy::Memory, Method::MgTurbo)
}

#[allow(clippy::too_many_arguments)]
fn run_trust(
    objective: &dyn Objective,
    space: &SearchSpace,
    config: &OptimizerConfig,
    seed: RunSeed,
    observer: &mut dyn RunObserver,
    regions: usize,
    policy: RestartPolicy,
    method: Method,
) -> std::result::Result<RunResult, RunFailure> {
    config.validate(regions).map_err(config_failure)?;
    let mut ev = Evaluator::new(objective, space, config.budget, config.parallel, observer);
    match trust_loop(&mut ev, config, seed, regions, policy) {
        Ok(()) => ev.finish(config.metadata(method, seed)),
        Err(e) => Err(ev.fail(e)),
    }
}

struct RestartSource {
    policy: RestartPolicy,
    engine: SobolEngine,
    next: u32,
    snapshot: Option<BasinSnapshot>,
    t_cluster: usize,
}

impl RestartSource {
    fn recluster(&mut self, ev: &mut Evaluator<'_>, config: &OptimizerConfig, seed: RunSeed) -> Result<()> {
        let n = ev.len();
        let snapshot = cluster_basins(&ev.history, &config.basin, seed.child(CLUSTER_STREAM).child(n as u64))?;
        self.snapshot = Some(snapshot.clone());
        self.t_cluster = n;
        ev.push_snapshot(snapshot);
        Ok(())
    }

    fn maybe_recluster(&mut self, ev: &mut Evaluator<'_>, config: &OptimizerConfig, seed: RunSeed) -> Result<()> {
        if self.policy == RestartPolicy::Memory && ev.len() - self.t_cluster >= config.basin.tau_recluster {
            self.recluster(ev, config, seed)?;
        }
        Ok(())
    }

    fn restart(
        &mut self,
        ev: &mut Evaluator<'_>,
        region: &mut TrustRegionState,
        eval_index: usize,
        config: &OptimizerConfig,
        seed: RunSeed,
    ) -> Result<()> {
        let (center, best_y, kind, basin_id) = match self.policy {
            RestartPolicy::Random => {
                let c = self.engine.point(self.next);
                self.next += 1;
                (c, None, RestartKind::Random, None)
            }
            RestartPolicy::Memory => {
                if self.snapshot.is_none() {
                    self.recluster(ev, config, seed)?;
                }
                let snapshot = self.snapshot.as_ref().expect("snapshot built");
                let choice = select_restart(snapshot, &ev.history, &config.basin)?;
                let kind = if choice.basin_id.is_some() {
                    RestartKind::MemoryBasin
                } else {
                    RestartKind::GlobalBest
                };
                let mut center = choice.x_norm;
                let p = config.basin.restart_perturbation;
                if p > 0.0 {
                    let mut rng = seed.child(RESTART_STREAM).child(eval_index as u64).rng();
                    for c in &mut center {
                        *c = (*c + rng.random_range(-p..=p)).clamp(0.0, 1.0);
                    }
                }
                (center, Some(choice.y), kind, choice.basin_id)
            }
        };
        region.restart(center.clone(), best_y, &config.trust);
        ev.push_restart(RestartEvent {
            eval_index,
            region_id: region.region_id,
            kind,
            center,
            basin_id,
        });
        Ok(())
    }
}

fn trust_loop(
    ev: &mut Evaluator<'_>,
    config: &OptimizerConfig,
    seed: RunSeed,
    num_regions: usize,
    policy: RestartPolicy,
) -> Result<()> {
    initial_design(ev, config, seed)?;
    let dim = ev.space().dim();
    let count = config.candidates.count(dim, config.acquisition.strategy);
    let params = &config.trust;

    let mut order: Vec<usize> = (0..ev.len()).collect();
    let recs = ev.history.records();
    order.sort_by(|&a, &b| recs[a].y.total_cmp(&recs[b].y).then(a.cmp(&b)));
    let mut regions: Vec<TrustRegionState> = (0..num_regions)
        .map(|m| {
            let rec = &recs[order[m % order.len()]];
            TrustRegionState::new(m, rec.x_norm.clone(), rec.y, params)
        })
        .collect();

    let mut restarts = RestartSource {
        policy,
        engine: SobolEngine::scrambled(dim, seed.child(RESTART_STREAM))?,
        next: 0,
        snapshot: None,
        t_cluster: 0,
    };
    let mut surrogate = Surrogate::new(config.gp, seed.child(FIT_STREAM));
    let mut iteration = 0u64;

    while ev.len() < config.budget {
        restarts.maybe_recluster(ev, config, seed)?;
        let model = surrogate.update(&ev.history)?;
        let active = num_regions.min(config.budget - ev.len());
        let mut batch = Vec::with_capacity(active);
        for region in &regions[..active] {
            let m = region.region_id;
            let candidates = region_candidates(
                &region.center,
                region.delta,
                model.lengthscales(),
                count,
                config.candidates.box_shape,
                m,
                seed.child(CANDIDATE_STREAM).child(iteration).child(m as u64),
            )?;
            let idx = select(
                model,
                &candidates,
                config,
                &ev.history,
                seed.child(SELECT_STREAM).child(iteration).child(m as u64),
            )?;
            let x = candidates.points[idx].clone();
            let tr_box = region_box(&region.center, region.delta, model.lengthscales(), config.candidates.box_shape)?;
            ev.observer().on_proposal(region, &tr_box, &x);
            batch.push((x, Some(m)));
        }

        let first_index = ev.len() + 1;
        let ys = ev.evaluate_batch(&batch, Phase::Optimize)?;
        for (m, ((x, _), y)) in batch.iter().zip(ys).enumerate() {
            let region = &mut regions[m];
            region.observe(x, y, params);
            if region.collapsed {
                restarts.restart(ev, region, first_index + m, config, seed)?;
            }
        }
        iteration += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::TrustBox;
    use crate::objectives::FnObjective;
    use crate::run::NoopObserver;

    fn quick(budget: usize, init: usize, strategy: AcquisitionStrategy) -> OptimizerConfig {
        let mut c = OptimizerConfig::new(budget, init, strategy);
        c.gp.starts = 2;
        c.gp.max_evals_per_start = 40;
        c
    }

    fn bowl() -> FnObjective<impl Fn(&[f64]) -> f64 + Sync> {
        FnObjective(|x: &[f64]| x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum())
    }

    #[test]
    fn bo_budget_and_phases() {
        let space = SearchSpace::unit(3).unwrap();
        for strategy in [AcquisitionStrategy::Thompson, AcquisitionStrategy::Adaptive] {
            let cfg = quick(25, 10, strategy);
            let r = run_bo(&bowl(), &space, &cfg, RunSeed::new(1), &mut NoopObserver).unwrap();
            assert_eq!(r.history.len(), 25);
            let init = r.history.records().iter().filter(|r| r.phase == Phase::Init).count();
            assert_eq!(init, 10);
            assert!(r.restart_events.is_empty());
        }
    }

    #[test]
    fn single_guided_evaluation() {
        let space = SearchSpace::unit(2).unwrap();
        let cfg = quick(11, 10, AcquisitionStrategy::Thompson);
        let r = run_turbo(&bowl(), &space, &cfg, RunSeed::new(1), &mut NoopObserver).unwrap();
        assert_eq!(r.history.len(), 11);
        assert_eq!(r.history.records()[10].phase, Phase::Optimize);
        assert_eq!(r.history.records()[10].region_id, Some(0));
    }

    #[test]
    fn invalid_budgets() {
        let space = SearchSpace::unit(2).unwrap();
        let cfg = quick(10, 10, AcquisitionStrategy::Thompson);
        assert!(run_bo(&bowl(), &space, &cfg, RunSeed::new(1), &mut NoopObserver).is_err());
        let cfg = quick(12, 10, AcquisitionStrategy::Thompson);
        assert!(run_multi_turbo(&bowl(), &space, &cfg, RunSeed::new(1), &mut NoopObserver).is_err());
        let cfg = quick(12, 1, AcquisitionStrategy::Thompson);
        assert!(run_turbo(&bowl(), &space, &cfg, RunSeed::new(1), &mut NoopObserver).is_err());
    }

    #[test]
    fn multi_turbo_iterations_and_interleaving() {
        let space = SearchSpace::unit(2).unwrap();
        let cfg = quick(19, 10, AcquisitionStrategy::Thompson);
        let r = run_multi_turbo(&bowl(), &space, &cfg, RunSeed::new(2), &mut NoopObserver).unwrap();
        let tags: Vec<Option<usize>> = r.history.records()[10..].iter().map(|r| r.region_id).collect();
        assert_eq!(tags, vec![Some(0), Some(1), Some(2)].repeat(3));
        let cfg = quick(21, 10, AcquisitionStrategy::Thompson);
        let r = run_multi_turbo(&bowl(), &space, &cfg, RunSeed::new(2), &mut NoopObserver).unwrap();
        let tail: Vec<Option<usize>> = r.history.records()[19..].iter().map(|r| r.region_id).collect();
        assert_eq!(tail, vec![Some(0), Some(1)]);
    }

    struct Recorder {
        proposals: Vec<(usize, f64, TrustBox, Vec<f64>)>,
        restarts: Vec<RestartEvent>,
    }

    impl RunObserver for Recorder {
        fn on_restart(&mut self, event: &RestartEvent) {
            self.restarts.push(event.clone());
        }
        fn on_proposal(&mut self, region: &TrustRegionState, tr_box: &TrustBox, x: &[f64]) {
            self.proposals.push((region.region_id, region.delta, tr_box.clone(), x.to_vec()));
        }
    }

    #[test]
    fn constant_objective_collapses_on_schedule() {
        let space = SearchSpace::unit(2).unwrap();
        let flat = FnObjective(|_: &[f64]| 1.0);
        let cfg = quick(75, 10, AcquisitionStrategy::Thompson);
        let mut rec = Recorder { proposals: vec![], restarts: vec![] };
        let r = run_turbo(&flat, &space, &cfg, RunSeed::new(3), &mut rec).unwrap();
        // Region starts with a reference value, so every guided evaluation fails.
        // Collapse fires on the 30th failure (a contraction attempted at the minimum).
        assert_eq!(r.restart_events.len(), 2, "{:?}", r.restart_events);
        assert_eq!(r.restart_events[0].eval_index, 10 + 30);
        assert_eq!(r.restart_events[0].kind, RestartKind::Random);
        assert_eq!(rec.restarts, r.restart_events);
        // First evaluation after a random restart only sets the reference value.
        assert_eq!(r.restart_events[1].eval_index, 40 + 1 + 30);
        let deltas: Vec<f64> = rec.proposals.iter().map(|p| p.1).collect();
        assert_eq!(deltas[30], 0.8);
        assert_eq!(deltas[25], 0.5f64.powi(5));
        assert_eq!(deltas[24], 0.05);
    }

    #[test]
    fn on_reach_collapse_after_twenty_five() {
        let space = SearchSpace::unit(2).unwrap();
        let flat = FnObjective(|_: &[f64]| 1.0);
        let mut cfg = quick(40, 10, AcquisitionStrategy::Thompson);
        cfg.trust.collapse_rule = super::super::CollapseRule::OnReach;
        let r = run_turbo(&flat, &space, &cfg, RunSeed::new(3), &mut NoopObserver).unwrap();
        assert_eq!(r.restart_events[0].eval_index, 10 + 25);
    }

    #[test]
    fn proposals_lie_in_region_box() {
        let space = SearchSpace::unit(3).unwrap();
        let f = FnObjective(|x: &[f64]| (10.0 * x[0]).sin() + x[1] * x[2]);
        for (i, runner) in [run_turbo, run_multi_turbo, run_mg_turbo].into_iter().enumerate() {
            let mut cfg = quick(60, 10, AcquisitionStrategy::Adaptive);
            cfg.basin.tau_recluster = 10;
            let mut rec = Recorder { proposals: vec![], restarts: vec![] };
            let r = runner(&f, &space, &cfg, RunSeed::new(4 + i as u64), &mut rec).unwrap();
            assert_eq!(r.history.len(), 60);
            assert_eq!(rec.proposals.len(), 50);
            for (_, _, b, x) in &rec.proposals {
                assert!(b.contains(x));
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let space = SearchSpace::unit(2).unwrap();
        let flat = FnObjective(|x: &[f64]| (x[0] * 7.0).cos() + x[1]);
        let cfg = quick(70, 10, AcquisitionStrategy::Thompson);
        let a = run_mg_turbo(&flat, &space, &cfg, RunSeed::new(8), &mut NoopObserver).unwrap();
        let b = run_mg_turbo(&flat, &space, &cfg, RunSeed::new(8), &mut NoopObserver).unwrap();
        let ys = |r: &RunResult| r.history.records().iter().map(|r| (r.y, r.x_norm.clone())).collect::<Vec<_>>();
        assert_eq!(ys(&a), ys(&b));
        assert_eq!(a.restart_events, b.restart_events);
        let mut par = cfg.clone();
        par.parallel = true;
        let c = run_mg_turbo(&flat, &space, &par, RunSeed::new(8), &mut NoopObserver).unwrap();
        assert_eq!(ys(&a), ys(&c));
    }

    #[test]
    fn mg_restarts_use_memory() {
        let space = SearchSpace::unit(2).unwrap();
        let flat = FnObjective(|_: &[f64]| 1.0);
        let cfg = quick(110, 10, AcquisitionStrategy::Thompson);
        let r = run_mg_turbo(&flat, &space, &cfg, RunSeed::new(3), &mut NoopObserver).unwrap();
        assert_eq!(r.restart_events.len(), 3);
        for e in &r.restart_events {
            assert_eq!(e.kind, RestartKind::MemoryBasin);
            assert!(e.basin_id.is_some());
        }
        assert!(!r.snapshots.is_empty());
    }

    #[test]
    fn perturbed_memory_restarts_stay_near_stored_points() {
        let space = SearchSpace::unit(2).unwrap();
        let flat = FnObjective(|_: &[f64]| 1.0);
        let mut cfg = quick(110, 10, AcquisitionStrategy::Thompson);
        cfg.basin.restart_perturbation = 0.1;
        let r = run_mg_turbo(&flat, &space, &cfg, RunSeed::new(3), &mut NoopObserver).unwrap();
        assert!(!r.restart_events.is_empty());
        let recs = r.history.records();
        for e in &r.restart_events {
            let before = &recs[..e.eval_index];
            assert!(e.center.iter().all(|c| (0.0..=1.0).contains(c)));
            assert!(before.iter().all(|rec| rec.x_norm != e.center));
            let near = before
                .iter()
                .any(|rec| rec.x_norm.iter().zip(&e.center).all(|(a, b)| (a - b).abs() <= 0.1));
            assert!(near);
        }
    }
}
