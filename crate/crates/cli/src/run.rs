use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mgturbo::baselines::{run_ga, run_random};
use mgturbo::trust::{run_bo, run_mg_turbo, run_multi_turbo, run_turbo};
use mgturbo::{Error, History, Method, RestartKind, RunFailure, RunObserver, RunResult, RunSeed};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::problem::Problem;
use crate::trace::{TraceWriter, BASINS_FILE, SUMMARY_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub error: Option<String>,
    pub label: String,
    pub seed: u64,
    pub evaluations: usize,
    pub best_y: Option<f64>,
    pub best_x: Option<Vec<f64>>,
    /// Fraction of counts with GEH within threshold at the best point.
    pub best_compliance: Option<f64>,
    pub wall_time_s: f64,
    pub restart_counts: BTreeMap<String, usize>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub label: String,
    pub runs: Vec<RunSummary>,
    pub median_best_y: Option<f64>,
    pub restart_counts: BTreeMap<String, usize>,
    pub config: RunConfig,
}

fn restart_map(events: &[mgturbo::RestartEvent]) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = [RestartKind::Random, RestartKind::MemoryBasin, RestartKind::GlobalBest]
        .iter()
        .map(|k| (k.as_str().to_string(), 0))
        .collect();
    for e in events {
        *counts.entry(e.kind.as_str().to_string()).or_insert(0) += 1;
    }
    counts
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

fn dispatch(
    config: &RunConfig,
    problem: &Problem,
    seed: u64,
    observer: &mut dyn RunObserver,
) -> std::result::Result<RunResult, RunFailure> {
    let objective = problem.objective.as_ref();
    let space = &problem.space;
    let seed = RunSeed::new(seed);
    let opt = config.optimizer_config();
    match config.method {
        Method::Bo => run_bo(objective, space, &opt, seed, observer),
        Method::Turbo => run_turbo(objective, space, &opt, seed, observer),
        Method::MultiTurbo => run_multi_turbo(objective, space, &opt, seed, observer),
        Method::MgTurbo => run_mg_turbo(objective, space, &opt, seed, observer),
        Method::Ga => {
            let mut ga = config.ga;
            ga.parallel = ga.parallel || config.parallel_evals;
            run_ga(objective, space, config.budget, &ga, seed, observer)
        }
        Method::Random => run_random(objective, space, config.budget, seed, observer),
    }
}

fn classify(error: &Error) -> CliError {
    match error {
        Error::InvalidConfig(_) | Error::InvalidSpace(_) | Error::DimensionMismatch { .. } => {
            CliError::Config(error.to_string())
        }
        _ => CliError::Objective(error.to_string()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs one seed, streaming its trace into `seed_<seed>/` under the output
/// directory. Returns the summary and, for failed runs, the error.
pub fn run_seed(config: &RunConfig, problem: &Problem, seed: u64) -> Result<(RunSummary, Option<CliError>)> {
    let dir = seed_dir(&config.out, seed);
    let mut writer = TraceWriter::create(&dir, problem.space.dim())?;
    let started = Instant::now();
    let outcome = dispatch(config, problem, seed, &mut writer);
    let wall_time_s = started.elapsed().as_secs_f64();
    let snapshots = writer.finish()?;
    write_json(&dir.join(BASINS_FILE), &snapshots)?;

    let best_of = |h: &History| {
        h.best().map(|b| {
            let x = problem.space.denormalize(&b.x_norm).ok();
            (b.y, x, b.compliance)
        })
    };
    let (status, error, history, events) = match &outcome {
        Ok(r) => (RunStatus::Ok, None, &r.history, &r.restart_events),
        Err(f) => (RunStatus::Failed, Some(classify(&f.error)), &f.history, &f.restart_events),
    };
    let best = best_of(history);
    let summary = RunSummary {
        status,
        error: error.as_ref().map(|e| e.to_string()),
        label: config.label(),
        seed,
        evaluations: history.len(),
        best_y: best.as_ref().map(|b| b.0),
        best_x: best.as_ref().and_then(|b| b.1.clone()),
        best_compliance: best.and_then(|b| b.2),
        wall_time_s,
        restart_counts: restart_map(events),
        config: config.resolved(),
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok((summary, error))
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Runs every seed and writes the seed-matrix summary. The first run
/// failure is returned after the summary is written.
pub fn cmd_run(config: &RunConfig) -> Result<MatrixSummary> {
    let problem = Problem::build(&config.problem)?;
    std::fs::create_dir_all(&config.out)?;
    let mut outcomes = Vec::with_capacity(config.seeds.len());
    if config.parallel_seeds && config.seeds.len() > 1 {
        let results: Vec<Result<(RunSummary, Option<CliError>)>> = std::thread::scope(|s| {
            let handles: Vec<_> = config
                .seeds
                .iter()
                .map(|&seed| {
                    let problem = &problem;
                    s.spawn(move || run_seed(config, problem, seed))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("run thread panicked"))
                .collect()
        });
        for r in results {
            outcomes.push(r?);
        }
    } else {
        for &seed in &config.seeds {
            let (summary, error) = run_seed(config, &problem, seed)?;
            let failed = error.is_some();
            outcomes.push((summary, error));
            if failed {
                break;
            }
        }
    }

    let mut first_error = None;
    let mut runs = Vec::with_capacity(outcomes.len());
    for (summary, error) in outcomes {
        if first_error.is_none() {
            first_error = error.map(|e| (summary.seed, e));
        }
        runs.push(summary);
    }
    let mut bests: Vec<f64> = runs
        .iter()
        .filter(|r| r.status == RunStatus::Ok)
        .filter_map(|r| r.best_y)
        .collect();
    let mut totals = restart_map(&[]);
    for r in &runs {
        for (k, v) in &r.restart_counts {
            *totals.entry(k.clone()).or_insert(0) += v;
        }
    }
    let matrix = MatrixSummary {
        label: config.label(),
        runs,
        median_best_y: median(&mut bests),
        restart_counts: totals,
        config: config.resolved(),
    };
    write_json(&config.out.join(SUMMARY_FILE), &matrix)?;
    match first_error {
        Some((seed, e)) => Err(match e {
            CliError::Objective(m) => CliError::Objective(format!("seed {seed}: {m}")),
            CliError::Config(m) => CliError::Config(format!("seed {seed}: {m}")),
            other => other,
        }),
        None => Ok(matrix),
    }
}
