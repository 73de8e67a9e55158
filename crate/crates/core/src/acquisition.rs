//! Candidate scoring: expected improvement, the adaptive EI/uncertainty blend
//! and Thompson sampling. Everything here works on the standardized target
//! scale of the surrogate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::space::RunSeed;
use crate::surrogate::{sample_gaussian, GpModel, GpPosterior};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionStrategy {
    #[default]
    Thompson,
    Adaptive,
}

impl AcquisitionStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Thompson => "thompson",
            Self::Adaptive => "adaptive",
        }
    }
}

impl std::str::FromStr for AcquisitionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thompson" => Ok(Self::Thompson),
            "adaptive" => Ok(Self::Adaptive),
            other => Err(Error::InvalidConfig(format!(
                "unknown acquisition strategy {other:?} (expected thompson or adaptive)"
            ))),
        }
    }
}

/// Tie-break policy for equal acquisition scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Lower posterior mean first, then lower candidate index.
    #[default]
    MeanThenIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    pub strategy: AcquisitionStrategy,
    pub beta_start: f64,
    pub beta_end: f64,
    pub tie_break: TieBreak,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            strategy: AcquisitionStrategy::Thompson,
            beta_start: 0.7,
            beta_end: 0.1,
            tie_break: TieBreak::MeanThenIndex,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.beta_start) || !unit(self.beta_end) || self.beta_start < self.beta_end {
            return Err(Error::InvalidConfig(format!(
                "beta schedule must satisfy 1 >= beta_start ({}) >= beta_end ({}) >= 0",
                self.beta_start, self.beta_end
            )));
        }
        Ok(())
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Expected improvement below `f_star` of a `Normal(mu, sigma²)` prediction.
pub fn expected_improvement(mu: f64, sigma: f64, f_star: f64) -> f64 {
    let gap = f_star - mu;
    if sigma <= 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    (gap * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

/// Exploration weight at evaluation `t`, linear from `beta_start` at `t_init`
/// to `beta_end` at `budget`.
pub fn beta_schedule(
    t: usize,
    t_init: usize,
    budget: usize,
    config: &AcquisitionConfig,
) -> Result<f64> {
    if t < t_init || t > budget {
        return Err(Error::InvalidConfig(format!(
            "schedule position {t} outside [{t_init}, {budget}]"
        )));
    }
    if budget == t_init {
        return Ok(config.beta_end);
    }
    let frac = (t - t_init) as f64 / (budget - t_init) as f64;
    Ok(config.beta_start + (config.beta_end - config.beta_start) * frac)
}

/// Min-max normalization to `[0, 1]`; a constant vector maps to 0.5.
fn min_max(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(hi > lo) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Blended scores `(1 - beta) EI~ + beta sigma~` over the candidate set.
pub fn adaptive_scores(posterior: &GpPosterior, f_star: f64, beta: f64) -> Vec<f64> {
    let ei: Vec<f64> = posterior
        .mean
        .iter()
        .zip(&posterior.std)
        .map(|(&m, &s)| expected_improvement(m, s, f_star))
        .collect();
    let ei = min_max(&ei);
    let sd = min_max(&posterior.std);
    ei.iter()
        .zip(&sd)
        .map(|(e, s)| (1.0 - beta) * e + beta * s)
        .collect()
}

/// Index of the best blended score; ties go to the lower posterior mean, then
/// the lower index.
pub fn adaptive_select(posterior: &GpPosterior, f_star: f64, beta: f64) -> usize {
    let scores = adaptive_scores(posterior, f_star, beta);
    let mut best = 0;
    for i in 1..scores.len() {
        let better = scores[i] > scores[best]
            || (scores[i] == scores[best] && posterior.mean[i] < posterior.mean[best]);
        if better {
            best = i;
        }
    }
    best
}

/// Index of the smallest value; ties go to the lower index.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Thompson selection from an explicit Gaussian over the candidates.
pub fn thompson_select_gaussian(mean: &[f64], cov: &DMatrix<f64>, seed: RunSeed) -> Result<usize> {
    if mean.is_empty() {
        return Err(Error::InvalidConfig("empty candidate set".into()));
    }
    Ok(argmin(&sample_gaussian(mean, cov, seed)?))
}

/// Draws one joint posterior sample over the candidates and returns its minimizer.
pub fn thompson_select(model: &GpModel, candidates: &CandidateSet, seed: RunSeed) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("empty candidate set".into()));
    }
    if candidates.len() == 1 {
        return Ok(0);
    }
    let sample = model.joint_sample(&candidates.points, seed)?;
    Ok(argmin(&sample))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::GpHyperparameters;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn ei_examples() {
        assert!((expected_improvement(1.0, 1.0, 1.0) - 0.398_942_280_4).abs() < 1e-6);
        assert_eq!(expected_improvement(0.5, 0.0, 1.0), 0.5);
        assert_eq!(expected_improvement(1.5, 0.0, 1.0), 0.0);
        assert!(expected_improvement(40.0, 1.0, 0.0) >= 0.0);
    }

    #[test]
    fn ei_matches_monte_carlo() {
        let mut rng = RunSeed::new(12).rng();
        for &(mu, sigma, f) in &[(0.0, 1.0, 0.0), (1.0, 0.3, 0.5), (-0.5, 2.0, 0.2)] {
            let n = 200_000;
            let mc: f64 = (0..n)
                .map(|_| {
                    let y = mu + sigma * rng.sample::<f64, _>(StandardNormal);
                    (f - y).max(0.0)
                })
                .sum::<f64>()
                / n as f64;
            assert!((mc - expected_improvement(mu, sigma, f)).abs() < 1e-2);
        }
    }

    #[test]
    fn ei_monotonicity() {
        let f = 0.3;
        for &s in &[0.0, 0.1, 1.0, 3.0] {
            let vals: Vec<f64> = (0..50)
                .map(|i| expected_improvement(-2.0 + 0.1 * i as f64, s, f))
                .collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
        for &mu in &[0.3, 0.8, 2.0] {
            let vals: Vec<f64> = (0..50)
                .map(|i| expected_improvement(mu, 0.05 * i as f64, f))
                .collect();
            assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        }
    }

    #[test]
    fn beta_schedule_endpoints() {
        let c = AcquisitionConfig::default();
        assert_eq!(beta_schedule(20, 20, 100, &c).unwrap(), 0.7);
        assert!((beta_schedule(100, 20, 100, &c).unwrap() - 0.1).abs() < 1e-15);
        assert!((beta_schedule(60, 20, 100, &c).unwrap() - 0.4).abs() < 1e-12);
        assert!(beta_schedule(19, 20, 100, &c).is_err());
        assert!(beta_schedule(101, 20, 100, &c).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AcquisitionConfig::default().validate().is_ok());
        let bad = AcquisitionConfig {
            beta_start: 0.1,
            beta_end: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn blend_hand_value() {
        // Three candidates arranged so the middle one normalizes to EI~=0.8, sigma~=0.5.
        // EI and sigma are monotone in each other here, so build the posterior directly.
        let beta: f64 = 0.3;
        let score = (1.0 - beta) * 0.8 + beta * 0.5;
        assert!((score - 0.71).abs() < 1e-12);
        let ei = [0.0, 0.8, 1.0];
        let sd = [0.0, 0.5, 1.0];
        let blended: Vec<f64> = ei.iter().zip(&sd).map(|(e, s)| (1.0 - beta) * e + beta * s).collect();
        assert!((blended[1] - 0.71).abs() < 1e-12);
        assert_eq!(min_max(&[2.0, 3.6, 4.0])[1], 0.8);
    }

    #[test]
    fn beta_zero_is_pure_ei() {
        let post = GpPosterior {
            mean: vec![0.2, -0.1, 0.4, 0.0],
            std: vec![0.9, 0.2, 1.5, 0.05],
        };
        let f = 0.0;
        let ei: Vec<f64> = post
            .mean
            .iter()
            .zip(&post.std)
            .map(|(&m, &s)| expected_improvement(m, s, f))
            .collect();
        let ei_best = (0..4).max_by(|&a, &b| ei[a].total_cmp(&ei[b])).unwrap();
        assert_eq!(adaptive_select(&post, f, 0.0), ei_best);
        // beta = 1: argmax of raw sigma
        assert_eq!(adaptive_select(&post, f, 1.0), 2);
    }

    #[test]
    fn degenerate_posterior_ties_to_index_zero() {
        let post = GpPosterior {
            mean: vec![0.3; 5],
            std: vec![0.7; 5],
        };
        let scores = adaptive_scores(&post, 0.0, 0.4);
        assert!(scores.iter().all(|&s| (s - 0.5).abs() < 1e-15));
        assert_eq!(adaptive_select(&post, 0.0, 0.4), 0);
    }

    #[test]
    fn tie_break_prefers_lower_mean() {
        let post = GpPosterior {
            mean: vec![0.5, 0.1, 0.5],
            std: vec![1.0, 1.0, 1.0],
        };
        // beta = 1 ignores EI; every sigma~ is 0.5, so the mean decides.
        assert_eq!(adaptive_select(&post, 0.0, 1.0), 1);
    }

    #[test]
    fn thompson_single_candidate() {
        let model = GpModel::with_hyperparameters(
            vec![vec![0.1], vec![0.9]],
            &[0.0, 1.0],
            GpHyperparameters::new(vec![0.3], 1.0, 1e-3).unwrap(),
        )
        .unwrap();
        let set = CandidateSet {
            points: vec![vec![0.5]],
            origin: crate::candidates::CandidateOrigin::Global,
        };
        assert_eq!(thompson_select(&model, &set, RunSeed::new(0)).unwrap(), 0);
    }

    #[test]
    fn thompson_prefers_clearly_better_candidate() {
        // One low observation among many high ones standardizes to about -3.9;
        // candidates far from the data revert to the prior N(0, 0.25).
        let mut x = vec![vec![0.1]];
        let mut y = vec![-3.0];
        for i in 0..15 {
            x.push(vec![0.3 + 0.01 * i as f64]);
            y.push(3.0);
        }
        let model = GpModel::with_hyperparameters(
            x,
            &y,
            GpHyperparameters::new(vec![0.01], 0.25, 1e-6).unwrap(),
        )
        .unwrap();
        let set = CandidateSet {
            points: vec![vec![0.6], vec![0.1], vec![0.95]],
            origin: crate::candidates::CandidateOrigin::Global,
        };
        let post = model.posterior(&set.points).unwrap();
        // Pinned candidate sits far below the others' 3-sigma band.
        assert!(post.mean[1] < post.mean[0] - 3.0 * post.std[0]);
        let n = 10_000;
        let hits = (0..n)
            .filter(|&s| thompson_select(&model, &set, RunSeed::new(s)).unwrap() == 1)
            .count();
        assert!(hits as f64 / n as f64 >= 0.99);
    }
}
