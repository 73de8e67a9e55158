//! Synthetic count-calibration problems with a hidden true parameter vector.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::geh::{fraction_within, geh_values, CountVector, GEH_THRESHOLD};
use super::{Evaluation, Objective, ObjectiveError};
use crate::error::{Error, Result};
use crate::space::{RunSeed, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    #[default]
    Linear,
    /// `cap * (1 - exp(-(A x) / cap))` per count.
    Saturating,
}

/// Parameters for generating a random problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub dim: usize,
    /// Number of counts; defaults to `3 * dim`.
    #[serde(default)]
    pub num_counts: Option<usize>,
    #[serde(default)]
    pub response: ResponseKind,
    /// Relative noise level applied to observed and simulated counts.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(dim: usize, response: ResponseKind, noise: f64, seed: u64) -> Self {
        Self {
            dim,
            num_counts: None,
            response,
            noise,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCalibration {
    space: SearchSpace,
    x_true: Vec<f64>,
    response: ResponseKind,
    matrix: Vec<Vec<f64>>,
    caps: Vec<f64>,
    noise: f64,
    seed: RunSeed,
    sim_factors: Vec<f64>,
    observed: CountVector,
}

const OBS_STREAM: u64 = 1;
const SIM_STREAM: u64 = 2;
const INSTANCE_STREAM: u64 = 3;

impl SyntheticCalibration {
    /// Builds a problem from explicit parts. `caps` is required (one per
    /// count) for the saturating response and ignored for the linear one.
    pub fn new(
        space: SearchSpace,
        x_true: Vec<f64>,
        response: ResponseKind,
        matrix: Vec<Vec<f64>>,
        caps: Vec<f64>,
        noise: f64,
        seed: RunSeed,
    ) -> Result<Self> {
        let d = space.dim();
        check_in_bounds(&space, &x_true)?;
        if matrix.is_empty() {
            return Err(Error::InvalidConfig("response matrix has no rows".into()));
        }
        for row in &matrix {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: row.len(),
                });
            }
            if row.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::InvalidConfig(
                    "response weights must be finite and non-negative".into(),
                ));
            }
        }
        if response == ResponseKind::Saturating
            && (caps.len() != matrix.len() || caps.iter().any(|c| !(c.is_finite() && *c > 0.0)))
        {
            return Err(Error::InvalidConfig(
                "saturating response needs one positive cap per count".into(),
            ));
        }
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::InvalidConfig(format!("noise must be >= 0, got {noise}")));
        }

        let n = matrix.len();
        let factors = |stream: u64| -> Vec<f64> {
            let mut rng = seed.child(stream).rng();
            (0..n)
                .map(|_| {
                    let e: f64 = rng.sample(StandardNormal);
                    (1.0 + noise * e).max(0.0)
                })
                .collect()
        };
        let obs_factors = factors(OBS_STREAM);
        let sim_factors = factors(SIM_STREAM);

        let mut problem = Self {
            space,
            x_true,
            response,
            matrix,
            caps,
            noise,
            seed,
            sim_factors,
            observed: CountVector::new(vec![0.0]).expect("placeholder"),
        };
        let clean = problem.response_counts(&problem.x_true);
        let observed: Vec<f64> = clean.iter().zip(&obs_factors).map(|(c, f)| c * f).collect();
        problem.observed = CountVector::new(observed)
            .map_err(|e| Error::InvalidConfig(format!("observed counts: {e}")))?;
        Ok(problem)
    }

    /// Draws a random instance: heterogeneous parameter scales, a sparse
    /// non-negative response matrix, and an interior true parameter vector.
    pub fn generate(spec: &SyntheticSpec) -> Result<Self> {
        let d = spec.dim;
        if d == 0 {
            return Err(Error::InvalidConfig("dimension must be >= 1".into()));
        }
        let n = spec.num_counts.unwrap_or(3 * d);
        if n == 0 {
            return Err(Error::InvalidConfig("num_counts must be >= 1".into()));
        }
        let seed = RunSeed::new(spec.seed);
        let mut rng = seed.child(INSTANCE_STREAM).rng();

        let scales: Vec<f64> = (0..d).map(|_| 10f64.powf(rng.random_range(-1.0..1.0))).collect();
        let lower: Vec<f64> = scales.iter().map(|s| 0.2 * s).collect();
        let upper: Vec<f64> = scales.iter().map(|s| 2.0 * s).collect();
        let x_true: Vec<f64> = (0..d)
            .map(|j| lower[j] + rng.random_range(0.2..0.8) * (upper[j] - lower[j]))
            .collect();

        let mut matrix = vec![vec![0.0; d]; n];
        for (i, row) in matrix.iter_mut().enumerate() {
            let k = rng.random_range(2..=4usize).min(d);
            let mut chosen = vec![i % d];
            while chosen.len() < k {
                let j = rng.random_range(0..d);
                if !chosen.contains(&j) {
                    chosen.push(j);
                }
            }
            for j in chosen {
                row[j] = rng.random_range(20.0..200.0) / scales[j];
            }
        }
        let caps: Vec<f64> = matrix
            .iter()
            .map(|row| {
                let z: f64 = row.iter().zip(&x_true).map(|(a, x)| a * x).sum();
                z * rng.random_range(1.0..2.0)
            })
            .collect();

        let space = SearchSpace::new(lower, upper)?;
        Self::new(space, x_true, spec.response, matrix, caps, spec.noise, seed)
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn x_true(&self) -> &[f64] {
        &self.x_true
    }

    pub fn response_kind(&self) -> ResponseKind {
        self.response
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn seed(&self) -> RunSeed {
        self.seed
    }

    pub fn observed(&self) -> &CountVector {
        &self.observed
    }

    pub fn num_counts(&self) -> usize {
        self.matrix.len()
    }

    fn response_counts(&self, x_raw: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let z: f64 = row.iter().zip(x_raw).map(|(a, x)| a * x).sum();
                match self.response {
                    ResponseKind::Linear => z,
                    ResponseKind::Saturating => {
                        let cap = self.caps[i];
                        cap * (1.0 - (-z / cap).exp())
                    }
                }
            })
            .collect()
    }

    /// Simulated counts under the frozen noise realization.
    pub fn simulate(&self, x_raw: &[f64]) -> Result<CountVector> {
        check_in_bounds(&self.space, x_raw)?;
        let sim: Vec<f64> = self
            .response_counts(x_raw)
            .into_iter()
            .zip(&self.sim_factors)
            .map(|(c, f)| c * f)
            .collect();
        CountVector::new(sim).map_err(|e| Error::InvalidConfig(format!("simulated counts: {e}")))
    }

    /// Mean GEH against the observed counts, plus the simulated counts.
    pub fn synthetic_eval(&self, x_raw: &[f64]) -> Result<(f64, CountVector)> {
        let (value, _, sim) = self.eval_full(x_raw)?;
        Ok((value, sim))
    }

    fn eval_full(&self, x_raw: &[f64]) -> Result<(f64, f64, CountVector)> {
        let sim = self.simulate(x_raw)?;
        let values = geh_values(&sim, &self.observed)
            .map_err(|e| Error::InvalidConfig(format!("GEH: {e}")))?;
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok((mean, fraction_within(&values, GEH_THRESHOLD), sim))
    }
}

fn check_in_bounds(space: &SearchSpace, x: &[f64]) -> Result<()> {
    space.normalize(x).map(|_| ())
}

impl Objective for SyntheticCalibration {
    fn evaluate(&self, x_raw: &[f64]) -> Result<Evaluation, ObjectiveError> {
        let (value, compliance, _) = self
            .eval_full(x_raw)
            .map_err(|e| ObjectiveError::InvalidInput(e.to_string()))?;
        Ok(Evaluation {
            value,
            compliance: Some(compliance),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::geh;

    fn one_d(noise: f64) -> SyntheticCalibration {
        SyntheticCalibration::new(
            SearchSpace::new(vec![0.0], vec![2.0]).unwrap(),
            vec![1.0],
            ResponseKind::Linear,
            vec![vec![100.0]],
            vec![],
            noise,
            RunSeed::new(0),
        )
        .unwrap()
    }

    #[test]
    fn hand_example() {
        let p = one_d(0.0);
        assert_eq!(p.observed().as_slice(), &[100.0]);
        let (g, sim) = p.synthetic_eval(&[1.21]).unwrap();
        assert!((sim.as_slice()[0] - 121.0).abs() < 1e-12);
        assert!((g - geh(121.0, 100.0).unwrap()).abs() < 1e-12);
        assert!((g - 1.9977).abs() < 1e-4);
    }

    #[test]
    fn zero_at_truth_without_noise() {
        for response in [ResponseKind::Linear, ResponseKind::Saturating] {
            let p = SyntheticCalibration::generate(&SyntheticSpec::new(6, response, 0.0, 11)).unwrap();
            let (g, _) = p.synthetic_eval(p.x_true()).unwrap();
            assert!(g.abs() < 1e-12, "{response:?}: {g}");
        }
    }

    #[test]
    fn truth_beats_random_points_with_noise() {
        let p = SyntheticCalibration::generate(&SyntheticSpec::new(8, ResponseKind::Saturating, 0.05, 3))
            .unwrap();
        let (g_true, _) = p.synthetic_eval(p.x_true()).unwrap();
        assert!(g_true > 0.0);
        let mut rng = RunSeed::new(9).rng();
        for _ in 0..50 {
            let z: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
            let x = p.space().denormalize(&z).unwrap();
            assert!(p.synthetic_eval(&x).unwrap().0 > g_true);
        }
    }

    #[test]
    fn deterministic_and_out_of_bounds() {
        let p = SyntheticCalibration::generate(&SyntheticSpec::new(4, ResponseKind::Saturating, 0.05, 1))
            .unwrap();
        let x = p.space().denormalize(&[0.3, 0.6, 0.1, 0.9]).unwrap();
        assert_eq!(p.synthetic_eval(&x).unwrap(), p.synthetic_eval(&x).unwrap());
        let q = SyntheticCalibration::generate(&SyntheticSpec::new(4, ResponseKind::Saturating, 0.05, 1))
            .unwrap();
        assert_eq!(p.synthetic_eval(&x).unwrap(), q.synthetic_eval(&x).unwrap());
        let mut bad = x.clone();
        bad[0] = p.space().upper()[0] * 2.0;
        assert!(p.synthetic_eval(&bad).is_err());
        assert!(p.evaluate(&bad).is_err());
    }

    #[test]
    fn saturating_stays_below_cap() {
        let p = SyntheticCalibration::generate(&SyntheticSpec::new(5, ResponseKind::Saturating, 0.0, 2))
            .unwrap();
        let sim = p.simulate(p.space().upper()).unwrap();
        for (s, c) in sim.as_slice().iter().zip(p.caps()) {
            assert!(s < c);
        }
    }

    #[test]
    fn generated_shape() {
        let p = SyntheticCalibration::generate(&SyntheticSpec::new(14, ResponseKind::Linear, 0.0, 5)).unwrap();
        assert_eq!(p.num_counts(), 42);
        for j in 0..14 {
            assert!(p.matrix().iter().any(|row| row[j] > 0.0), "parameter {j} unused");
        }
        let e = p.evaluate(p.x_true()).unwrap();
        assert_eq!(e.compliance, Some(1.0));
    }
}
