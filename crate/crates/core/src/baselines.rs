//! Surrogate-free baselines: a real-coded genetic algorithm and random search.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::run::{config_failure, Evaluator, Method, RunFailure, RunMetadata, RunObserver, RunResult};
use crate::space::{Phase, RunSeed, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population_size: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    /// Simulated binary crossover distribution index.
    pub crossover_eta: f64,
    /// Per-gene mutation probability; `None` means `1 / d`.
    pub mutation_prob: Option<f64>,
    /// Polynomial mutation distribution index.
    pub mutation_eta: f64,
    pub elitism: usize,
    /// Evaluate each generation's offspring concurrently.
    pub parallel: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 20,
            tournament_size: 2,
            crossover_prob: 0.9,
            crossover_eta: 15.0,
            mutation_prob: None,
            mutation_eta: 20.0,
            elitism: 1,
            parallel: false,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.population_size < 2 {
            return bad(format!("population_size must be >= 2, got {}", self.population_size));
        }
        if self.tournament_size < 1 {
            return bad("tournament_size must be >= 1".into());
        }
        if self.elitism >= self.population_size {
            return bad("elitism must be smaller than population_size".into());
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad(format!("crossover_prob must lie in [0, 1], got {}", self.crossover_prob));
        }
        if let Some(p) = self.mutation_prob {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("mutation_prob must lie in [0, 1], got {p}"));
            }
        }
        if !(self.crossover_eta >= 0.0 && self.mutation_eta >= 0.0) {
            return bad("distribution indices must be >= 0".into());
        }
        Ok(())
    }
}

fn tournament(ys: &[f64], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut best = rng.random_range(0..ys.len());
    for _ in 1..size {
        let c = rng.random_range(0..ys.len());
        if ys[c] < ys[best] || (ys[c] == ys[best] && c < best) {
            best = c;
        }
    }
    best
}

/// Simulated binary crossover on `[0, 1]` genes, clipped.
pub fn sbx(p1: &[f64], p2: &[f64], eta: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for j in 0..p1.len() {
        if rng.random::<f64>() >= 0.5 {
            continue;
        }
        let u: f64 = rng.random();
        let beta = if u <= 0.5 {
            (2.0 * u).powf(1.0 / (eta + 1.0))
        } else {
            (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
        };
        c1[j] = (0.5 * ((1.0 + beta) * p1[j] + (1.0 - beta) * p2[j])).clamp(0.0, 1.0);
        c2[j] = (0.5 * ((1.0 - beta) * p1[j] + (1.0 + beta) * p2[j])).clamp(0.0, 1.0);
    }
    (c1, c2)
}

/// Polynomial mutation on `[0, 1]` genes, clipped.
pub fn polynomial_mutation(x: &mut [f64], prob: f64, eta: f64, rng: &mut ChaCha8Rng) {
    for v in x.iter_mut() {
        if rng.random::<f64>() >= prob {
            continue;
        }
        let u: f64 = rng.random();
        let delta = if u < 0.5 {
            (2.0 * u).powf(1.0 / (eta + 1.0)) - 1.0
        } else {
            1.0 - (2.0 * (1.0 - u)).powf(1.0 / (eta + 1.0))
        };
        *v = (*v + delta).clamp(0.0, 1.0);
    }
}

/// Generational GA. The first population is uniform random; each later
/// generation is a full set of offspring in which the worst `elitism`
/// individuals are replaced by the best parents.
pub fn run_ga(
    objective: &dyn Objective,
    space: &SearchSpace,
    budget: usize,
    config: &GaConfig,
    seed: RunSeed,
    observer: &mut dyn RunObserver,
) -> std::result::Result<RunResult, RunFailure> {
    config.validate().map_err(config_failure)?;
    if budget < config.population_size {
        return Err(config_failure(Error::InvalidConfig(format!(
            "budget ({budget}) must be >= population_size ({})",
            config.population_size
        ))));
    }
    let mut ev = Evaluator::new(objective, space, budget, config.parallel, observer);
    let metadata = RunMetadata {
        method: Method::Ga,
        acquisition: None,
        seed: seed.seed,
        budget,
        init_size: config.population_size,
    };
    match ga_loop(&mut ev, budget, config, seed) {
        Ok(()) => ev.finish(metadata),
        Err(e) => Err(ev.fail(e)),
    }
}

fn ga_loop(ev: &mut Evaluator<'_>, budget: usize, config: &GaConfig, seed: RunSeed) -> Result<()> {
    let d = ev.space().dim();
    let mut rng = seed.rng();
    let pm = config.mutation_prob.unwrap_or(1.0 / d as f64);
    let n = config.population_size;

    let mut pop: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    let batch: Vec<_> = pop.iter().map(|x| (x.clone(), None)).collect();
    let mut fit = ev.evaluate_batch(&batch, Phase::Init)?;

    while ev.len() < budget {
        let mut children: Vec<Vec<f64>> = Vec::with_capacity(n);
        while children.len() < n {
            let a = &pop[tournament(&fit, config.tournament_size, &mut rng)];
            let b = &pop[tournament(&fit, config.tournament_size, &mut rng)];
            let (mut c1, mut c2) = if rng.random::<f64>() < config.crossover_prob {
                sbx(a, b, config.crossover_eta, &mut rng)
            } else {
                (a.clone(), b.clone())
            };
            polynomial_mutation(&mut c1, pm, config.mutation_eta, &mut rng);
            polynomial_mutation(&mut c2, pm, config.mutation_eta, &mut rng);
            children.push(c1);
            if children.len() < n {
                children.push(c2);
            }
        }
        children.truncate(budget - ev.len());
        let batch: Vec<_> = children.iter().map(|x| (x.clone(), None)).collect();
        let mut child_fit = ev.evaluate_batch(&batch, Phase::Optimize)?;
        if children.len() < n {
            break;
        }

        apply_elitism(&pop, &fit, &mut children, &mut child_fit, config.elitism);
        pop = children;
        fit = child_fit;
    }
    Ok(())
}

/// Replaces the worst `elitism` children by the best parents.
fn apply_elitism(
    pop: &[Vec<f64>],
    fit: &[f64],
    children: &mut [Vec<f64>],
    child_fit: &mut [f64],
    elitism: usize,
) {
    let mut parent_order: Vec<usize> = (0..pop.len()).collect();
    parent_order.sort_by(|&i, &j| fit[i].total_cmp(&fit[j]).then(i.cmp(&j)));
    let mut child_order: Vec<usize> = (0..children.len()).collect();
    child_order.sort_by(|&i, &j| child_fit[j].total_cmp(&child_fit[i]).then(j.cmp(&i)));
    for e in 0..elitism.min(pop.len()).min(children.len()) {
        let (p, c) = (parent_order[e], child_order[e]);
        children[c] = pop[p].clone();
        child_fit[c] = fit[p];
    }
}

/// `budget` independent uniform points.
pub fn run_random(
    objective: &dyn Objective,
    space: &SearchSpace,
    budget: usize,
    seed: RunSeed,
    observer: &mut dyn RunObserver,
) -> std::result::Result<RunResult, RunFailure> {
    if budget < 1 {
        return Err(config_failure(Error::InvalidConfig("budget must be >= 1".into())));
    }
    let mut ev = Evaluator::new(objective, space, budget, false, observer);
    let d = space.dim();
    let mut rng = seed.rng();
    let metadata = RunMetadata {
        method: Method::Random,
        acquisition: None,
        seed: seed.seed,
        budget,
        init_size: 0,
    };
    for _ in 0..budget {
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        if let Err(e) = ev.evaluate_batch(&[(x, None)], Phase::Optimize) {
            return Err(ev.fail(e));
        }
    }
    ev.finish(metadata)
}
