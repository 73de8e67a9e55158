//! Gaussian-process surrogate over the normalized design space.
//!
//! Matérn-5/2 kernel with ARD lengthscales. Targets are standardized to mean 0
//! and variance 1 before fitting; posterior moments are reported on that
//! standardized scale. Hyperparameters maximize the log marginal likelihood
//! with a seeded multi-start coordinate search over log-parameters.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{History, RunSeed};

const SQRT_5: f64 = 2.236_067_977_499_79;

/// Jitter ladder tried when a factorization fails: 0, then 1e-10 up to 1e-4.
const JITTER_LADDER: [f64; 8] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

pub const NOISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparameters {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyperparameters {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let ok = lengthscales.iter().all(|&l| l > 0.0 && l.is_finite())
            && signal_variance > 0.0
            && signal_variance.is_finite()
            && noise_variance >= NOISE_FLOOR
            && noise_variance.is_finite();
        if !ok || lengthscales.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "hyperparameters must be positive with noise >= {NOISE_FLOOR:e}: \
                 lengthscales={lengthscales:?}, signal={signal_variance}, noise={noise_variance}"
            )));
        }
        Ok(Self {
            lengthscales,
            signal_variance,
            noise_variance,
        })
    }

    fn to_log(&self) -> Vec<f64> {
        self.lengthscales
            .iter()
            .map(|l| l.ln())
            .chain([self.signal_variance.ln(), self.noise_variance.ln()])
            .collect()
    }

    fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        Self {
            lengthscales: theta[..d].iter().map(|t| t.exp()).collect(),
            signal_variance: theta[d].exp(),
            noise_variance: theta[d + 1].exp().max(NOISE_FLOOR),
        }
    }
}

/// Box bounds for the hyperparameter search (natural units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperBounds {
    pub lengthscale: (f64, f64),
    pub signal_variance: (f64, f64),
    pub noise_variance: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self {
            lengthscale: (0.005, 10.0),
            signal_variance: (0.05, 20.0),
            noise_variance: (NOISE_FLOOR, 0.1),
        }
    }
}

impl HyperBounds {
    fn log_bounds(&self, dim: usize) -> Vec<(f64, f64)> {
        let ln = |(a, b): (f64, f64)| (a.ln(), b.ln());
        std::iter::repeat_n(ln(self.lengthscale), dim)
            .chain([ln(self.signal_variance), ln(self.noise_variance)])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpFitConfig {
    pub starts: usize,
    pub max_evals_per_start: usize,
    /// Hyperparameters are re-optimized after this many new evaluations;
    /// in between the model is refactorized with fixed hyperparameters.
    pub refit_every: usize,
    pub bounds: HyperBounds,
}

impl Default for GpFitConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            max_evals_per_start: 200,
            refit_every: 10,
            bounds: HyperBounds::default(),
        }
    }
}

/// Matérn-5/2 covariance between two points.
pub fn matern52(a: &[f64], b: &[f64], lengthscales: &[f64], signal_variance: f64) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(lengthscales)
        .map(|((x, y), l)| {
            let t = (x - y) / l;
            t * t
        })
        .sum();
    matern52_from_r2(r2, signal_variance)
}

#[inline]
fn matern52_from_r2(r2: f64, signal_variance: f64) -> f64 {
    let s5r = SQRT_5 * r2.sqrt();
    signal_variance * (1.0 + s5r + 5.0 / 3.0 * r2) * (-s5r).exp()
}

/// Rows of `x` scaled by inverse lengthscales so that kernel distances are plain
/// Euclidean distances.
fn scale_inputs(x: &[Vec<f64>], lengthscales: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|p| p.iter().zip(lengthscales).map(|(v, l)| v / l).collect())
        .collect()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `K(x, x) + noise I`.
fn train_covariance(x: &[Vec<f64>], hyper: &GpHyperparameters) -> DMatrix<f64> {
    let scaled = scale_inputs(x, &hyper.lengthscales);
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = hyper.signal_variance + hyper.noise_variance;
        for i in (j + 1)..n {
            let v = matern52_from_r2(sq_dist(&scaled[i], &scaled[j]), hyper.signal_variance);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cross-covariance `K(train, queries)`, one column per query.
fn cross_covariance(
    train: &[Vec<f64>],
    queries: &[Vec<f64>],
    hyper: &GpHyperparameters,
) -> DMatrix<f64> {
    let st = scale_inputs(train, &hyper.lengthscales);
    let sq = scale_inputs(queries, &hyper.lengthscales);
    let mut k = DMatrix::zeros(train.len(), queries.len());
    for (c, q) in sq.iter().enumerate() {
        let mut col = k.column_mut(c);
        for (r, t) in st.iter().enumerate() {
            col[r] = matern52_from_r2(sq_dist(t, q), hyper.signal_variance);
        }
    }
    k
}

/// Lower Cholesky factor of `a`, escalating diagonal jitter on failure.
/// Returns the factor and the jitter that was needed.
pub fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    for &jitter in &JITTER_LADDER {
        let mut m = a.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(l) = cholesky_in_place(m) {
            return Ok((l, jitter));
        }
    }
    Err(Error::IllConditioned {
        jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
    })
}

const BLOCK: usize = 64;

/// Blocked right-looking Cholesky on a column-major matrix; the strict upper
/// triangle of the result is zeroed. Returns `None` if not positive definite.
fn cholesky_in_place(mut a: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut j0 = 0;
    while j0 < n {
        let nb = BLOCK.min(n - j0);
        // Factor the current panel (diagonal block and everything below it).
        factor_panel(&mut a, j0, nb)?;
        let rest = n - j0 - nb;
        if rest > 0 {
            let panel = a.view((j0 + nb, j0), (rest, nb)).clone_owned();
            let panel_t = panel.transpose();
            let mut k0 = 0;
            while k0 < rest {
                let kb = BLOCK.min(rest - k0);
                let rows = rest - k0;
                let mut target = a.view_mut((j0 + nb + k0, j0 + nb + k0), (rows, kb));
                target.gemm(
                    -1.0,
                    &panel.view((k0, 0), (rows, nb)),
                    &panel_t.view((0, k0), (nb, kb)),
                    1.0,
                );
                k0 += kb;
            }
        }
        j0 += nb;
    }
    for j in 1..n {
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Some(a)
}

/// Unblocked right-looking factorization of columns `j0..j0 + nb`, updating
/// only within the panel.
fn factor_panel(a: &mut DMatrix<f64>, j0: usize, nb: usize) -> Option<()> {
    let n = a.nrows();
    let data = a.as_mut_slice();
    for j in j0..j0 + nb {
        let pivot = data[j * n + j];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return None;
        }
        let d = pivot.sqrt();
        data[j * n + j] = d;
        let inv = 1.0 / d;
        for v in &mut data[j * n + j + 1..(j + 1) * n] {
            *v *= inv;
        }
        let (head, tail) = data.split_at_mut((j + 1) * n);
        let lj = &head[j * n..];
        for k in (j + 1)..j0 + nb {
            let lkj = lj[k];
            if lkj == 0.0 {
                continue;
            }
            let col_k = &mut tail[(k - j - 1) * n..(k - j) * n];
            for (dst, src) in col_k[k..].iter_mut().zip(&lj[k..n]) {
                *dst -= src * lkj;
            }
        }
    }
    Some(())
}

fn solve_lower(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let ok = l.solve_lower_triangular_mut(b);
    debug_assert!(ok);
}

fn solve_lower_vec(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let ok = l.solve_lower_triangular_mut(b);
    debug_assert!(ok);
}

fn solve_upper_transpose_vec(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let ok = l.tr_solve_lower_triangular_mut(b);
    debug_assert!(ok);
}

/// Log marginal likelihood `-½ yᵀK⁻¹y − ½ log|K| − (n/2) log 2π` of
/// (already standardized) targets under the given hyperparameters.
pub fn log_marginal_likelihood(
    x: &[Vec<f64>],
    y: &[f64],
    hyper: &GpHyperparameters,
) -> Result<f64> {
    let k = train_covariance(x, hyper);
    let (l, _) = cholesky_with_jitter(&k)?;
    Ok(lml_from_factor(&l, y))
}

fn lml_from_factor(l: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = y.len();
    let mut z = DVector::from_column_slice(y);
    solve_lower_vec(l, &mut z);
    let log_det: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    -0.5 * z.norm_squared() - log_det - 0.5 * n as f64 * (2.0 * PI).ln()
}

/// Posterior moments per query on the standardized scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GpPosterior {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// A fitted, immutable GP.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: GpHyperparameters,
    train_x: Vec<Vec<f64>>,
    train_y: Vec<f64>,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_std: f64,
    degenerate: bool,
    jitter: f64,
    log_likelihood: f64,
}

impl GpModel {
    /// Fits hyperparameters to the history.
    ///
    /// `warm_start`, when given, replaces the default first start point.
    pub fn fit(
        history: &History,
        seed: RunSeed,
        config: &GpFitConfig,
        warm_start: Option<&GpHyperparameters>,
    ) -> Result<Self> {
        let (x, y) = training_data(history);
        Self::fit_data(x, &y, seed, config, warm_start)
    }

    pub fn fit_data(
        x: Vec<Vec<f64>>,
        y_raw: &[f64],
        seed: RunSeed,
        config: &GpFitConfig,
        warm_start: Option<&GpHyperparameters>,
    ) -> Result<Self> {
        check_training_data(&x, y_raw)?;
        let dim = x[0].len();
        let (y, y_mean, y_std, degenerate) = standardize(y_raw);
        if degenerate {
            let hyper = warm_start
                .cloned()
                .unwrap_or_else(|| default_hyper(dim, &config.bounds));
            return Self::assemble(x, y, y_mean, y_std, true, hyper);
        }

        let bounds = config.bounds.log_bounds(dim);
        let mut objective = LmlSearch::new(&x, &y);

        let mut rng = seed.rng();
        let first = warm_start
            .cloned()
            .unwrap_or_else(|| default_hyper(dim, &config.bounds));
        let mut best_theta = clamp_theta(first.to_log(), &bounds);
        let mut best_value = f64::NEG_INFINITY;
        for start in 0..config.starts.max(1) {
            let theta0 = if start == 0 {
                best_theta.clone()
            } else {
                random_start(dim, &bounds, &mut rng)
            };
            let (theta, value) =
                coordinate_search(&mut objective, theta0, &bounds, config.max_evals_per_start);
            if value > best_value {
                best_value = value;
                best_theta = theta;
            }
        }
        if !best_value.is_finite() {
            return Err(Error::IllConditioned {
                jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
            });
        }
        let hyper = GpHyperparameters::from_log(&best_theta);
        Self::assemble(x, y, y_mean, y_std, false, hyper)
    }

    /// Builds a model with fixed hyperparameters (no search).
    pub fn with_hyperparameters(
        x: Vec<Vec<f64>>,
        y_raw: &[f64],
        hyper: GpHyperparameters,
    ) -> Result<Self> {
        check_training_data(&x, y_raw)?;
        if hyper.lengthscales.len() != x[0].len() {
            return Err(Error::DimensionMismatch {
                expected: x[0].len(),
                actual: hyper.lengthscales.len(),
            });
        }
        let (y, y_mean, y_std, degenerate) = standardize(y_raw);
        Self::assemble(x, y, y_mean, y_std, degenerate, hyper)
    }

    /// Same hyperparameters, new training data.
    pub fn refresh(&self, history: &History) -> Result<Self> {
        let (x, y) = training_data(history);
        Self::with_hyperparameters(x, &y, self.hyper.clone())
    }

    fn assemble(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        y_mean: f64,
        y_std: f64,
        degenerate: bool,
        hyper: GpHyperparameters,
    ) -> Result<Self> {
        let k = train_covariance(&x, &hyper);
        let (chol, jitter) = cholesky_with_jitter(&k)?;
        let mut alpha = DVector::from_column_slice(&y);
        solve_lower_vec(&chol, &mut alpha);
        let log_likelihood = {
            let log_det: f64 = (0..y.len()).map(|i| chol[(i, i)].ln()).sum();
            -0.5 * alpha.norm_squared() - log_det - 0.5 * y.len() as f64 * (2.0 * PI).ln()
        };
        solve_upper_transpose_vec(&chol, &mut alpha);
        Ok(Self {
            hyper,
            train_x: x,
            train_y: y,
            chol,
            alpha,
            y_mean,
            y_std,
            degenerate,
            jitter,
            log_likelihood,
        })
    }

    pub fn hyperparameters(&self) -> &GpHyperparameters {
        &self.hyper
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.hyper.lengthscales
    }

    pub fn dim(&self) -> usize {
        self.hyper.lengthscales.len()
    }

    pub fn train_x(&self) -> &[Vec<f64>] {
        &self.train_x
    }

    /// Standardized training targets.
    pub fn train_y(&self) -> &[f64] {
        &self.train_y
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn y_std(&self) -> f64 {
        self.y_std
    }

    /// True when all targets were equal; the posterior is then the prior
    /// around a constant mean.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn standardize_y(&self, y_raw: f64) -> f64 {
        (y_raw - self.y_mean) / self.y_std
    }

    pub fn unstandardize_y(&self, y: f64) -> f64 {
        y * self.y_std + self.y_mean
    }

    fn check_queries(&self, queries: &[Vec<f64>]) -> Result<()> {
        if let Some(q) = queries.iter().find(|q| q.len() != self.dim()) {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: q.len(),
            });
        }
        Ok(())
    }

    pub fn posterior(&self, queries: &[Vec<f64>]) -> Result<GpPosterior> {
        self.check_queries(queries)?;
        let sv = self.hyper.signal_variance;
        if self.degenerate {
            return Ok(GpPosterior {
                mean: vec![0.0; queries.len()],
                std: vec![sv.sqrt(); queries.len()],
            });
        }
        let mut ks = cross_covariance(&self.train_x, queries, &self.hyper);
        let mean: Vec<f64> = ks.tr_mul(&self.alpha).iter().copied().collect();
        solve_lower(&self.chol, &mut ks);
        let std = ks
            .column_iter()
            .map(|c| (sv - c.norm_squared()).max(0.0).sqrt())
            .collect();
        Ok(GpPosterior { mean, std })
    }

    /// Joint posterior mean and covariance of the latent function.
    pub fn joint_posterior(&self, queries: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        self.check_queries(queries)?;
        let m = queries.len();
        let mut prior = DMatrix::zeros(m, m);
        let scaled = scale_inputs(queries, &self.hyper.lengthscales);
        let sv = self.hyper.signal_variance;
        for j in 0..m {
            prior[(j, j)] = sv;
            for i in (j + 1)..m {
                let v = matern52_from_r2(sq_dist(&scaled[i], &scaled[j]), sv);
                prior[(i, j)] = v;
                prior[(j, i)] = v;
            }
        }
        if self.degenerate {
            return Ok((vec![0.0; m], prior));
        }
        let mut ks = cross_covariance(&self.train_x, queries, &self.hyper);
        let mean: Vec<f64> = ks.tr_mul(&self.alpha).iter().copied().collect();
        solve_lower(&self.chol, &mut ks);
        prior.gemm_tr(-1.0, &ks, &ks, 1.0);
        Ok((mean, prior))
    }

    /// One draw from the joint posterior over `queries`.
    pub fn joint_sample(&self, queries: &[Vec<f64>], seed: RunSeed) -> Result<Vec<f64>> {
        let (mean, cov) = self.joint_posterior(queries)?;
        sample_gaussian(&mean, &cov, seed)
    }
}

/// Draws `mean + L z` with `L Lᵀ = cov` (jitter-escalated) and `z` standard normal.
pub fn sample_gaussian(mean: &[f64], cov: &DMatrix<f64>, seed: RunSeed) -> Result<Vec<f64>> {
    let m = mean.len();
    if cov.nrows() != m || cov.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: cov.nrows(),
        });
    }
    let (l, _) = cholesky_with_jitter(cov)?;
    let mut rng = seed.rng();
    let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let lz = l * z;
    Ok(mean.iter().zip(lz.iter()).map(|(a, b)| a + b).collect())
}

fn training_data(history: &History) -> (Vec<Vec<f64>>, Vec<f64>) {
    history
        .records()
        .iter()
        .map(|r| (r.x_norm.clone(), r.y))
        .unzip()
}

fn check_training_data(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 || x.iter().all(|p| p == &x[0]) {
        return Err(Error::InsufficientData(x.len()));
    }
    if let Some(p) = x.iter().find(|p| p.len() != x[0].len()) {
        return Err(Error::DimensionMismatch {
            expected: x[0].len(),
            actual: p.len(),
        });
    }
    Ok(())
}

/// Returns standardized targets, mean, std and a degeneracy flag.
fn standardize(y: &[f64]) -> (Vec<f64>, f64, f64, bool) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 1e-12 * mean.abs().max(1.0)) {
        return (vec![0.0; y.len()], mean, 1.0, true);
    }
    (y.iter().map(|v| (v - mean) / std).collect(), mean, std, false)
}

fn default_hyper(dim: usize, bounds: &HyperBounds) -> GpHyperparameters {
    let l = (0.5 * (dim as f64).sqrt()).clamp(bounds.lengthscale.0, bounds.lengthscale.1);
    GpHyperparameters {
        lengthscales: vec![l; dim],
        signal_variance: 1.0_f64.clamp(bounds.signal_variance.0, bounds.signal_variance.1),
        noise_variance: 1e-3_f64.clamp(bounds.noise_variance.0, bounds.noise_variance.1),
    }
}

fn clamp_theta(mut theta: Vec<f64>, bounds: &[(f64, f64)]) -> Vec<f64> {
    for (t, &(lo, hi)) in theta.iter_mut().zip(bounds) {
        *t = t.clamp(lo, hi);
    }
    theta
}

fn random_start(dim: usize, bounds: &[(f64, f64)], rng: &mut impl Rng) -> Vec<f64> {
    let base = (0.5 * (dim as f64).sqrt()).ln() + rng.random_range(-1.5..1.5);
    let mut theta: Vec<f64> = (0..dim)
        .map(|_| base + rng.random_range(-0.25..0.25))
        .collect();
    theta.push(rng.random_range(0.5f64.ln()..2.0f64.ln()));
    theta.push(rng.random_range(NOISE_FLOOR.ln()..1e-2f64.ln()));
    clamp_theta(theta, bounds)
}

/// Largest per-dimension difference cache, in entries.
const MAX_DIFF_CACHE: usize = 8 << 20;

/// Log marginal likelihood over log hyperparameters, for coordinate search.
///
/// Squared distances are cached per dimension so a probe that moves a single
/// lengthscale updates the scaled distances in `O(n²)` instead of `O(n² d)`.
struct LmlSearch<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    /// Packed strictly-lower pairwise squared differences, one block per dimension.
    diffs: Option<Vec<f64>>,
    pairs: usize,
    base_theta: Vec<f64>,
    base_r2: Vec<f64>,
    probe_theta: Vec<f64>,
    probe_r2: Vec<f64>,
    probe_own: bool,
}

impl<'a> LmlSearch<'a> {
    fn new(x: &'a [Vec<f64>], y: &'a [f64]) -> Self {
        let n = x.len();
        let dim = x[0].len();
        let pairs = n * (n - 1) / 2;
        let diffs = (pairs * dim <= MAX_DIFF_CACHE).then(|| {
            let mut d = vec![0.0; pairs * dim];
            for k in 0..dim {
                let block = &mut d[k * pairs..(k + 1) * pairs];
                let mut p = 0;
                for j in 0..n {
                    for i in (j + 1)..n {
                        let t = x[i][k] - x[j][k];
                        block[p] = t * t;
                        p += 1;
                    }
                }
            }
            d
        });
        Self {
            x,
            y,
            diffs,
            pairs,
            base_theta: Vec::new(),
            base_r2: vec![0.0; pairs],
            probe_theta: Vec::new(),
            probe_r2: vec![0.0; pairs],
            probe_own: false,
        }
    }

    fn full_r2(&self, theta: &[f64], out: &mut [f64]) {
        let dim = self.x[0].len();
        match &self.diffs {
            Some(diffs) => {
                out.fill(0.0);
                for k in 0..dim {
                    let w = (-2.0 * theta[k]).exp();
                    let block = &diffs[k * self.pairs..(k + 1) * self.pairs];
                    for (o, d) in out.iter_mut().zip(block) {
                        *o += w * d;
                    }
                }
            }
            None => {
                let ls: Vec<f64> = theta[..dim].iter().map(|t| t.exp()).collect();
                let scaled = scale_inputs(self.x, &ls);
                let n = self.x.len();
                let mut p = 0;
                for j in 0..n {
                    for i in (j + 1)..n {
                        out[p] = sq_dist(&scaled[i], &scaled[j]);
                        p += 1;
                    }
                }
            }
        }
    }

    fn value(&mut self, theta: &[f64]) -> f64 {
        let dim = self.x[0].len();
        let changed: Vec<usize> = if self.base_theta.is_empty() {
            (0..dim).collect()
        } else {
            (0..dim).filter(|&k| theta[k] != self.base_theta[k]).collect()
        };
        let mut probe = std::mem::take(&mut self.probe_r2);
        self.probe_own = !changed.is_empty();
        match (changed.as_slice(), &self.diffs) {
            ([], _) => {}
            ([k], Some(diffs)) if !self.base_theta.is_empty() => {
                let dw = (-2.0 * theta[*k]).exp() - (-2.0 * self.base_theta[*k]).exp();
                let block = &diffs[k * self.pairs..(k + 1) * self.pairs];
                for ((o, b), d) in probe.iter_mut().zip(&self.base_r2).zip(block) {
                    *o = b + dw * d;
                }
            }
            _ => self.full_r2(theta, &mut probe),
        }
        self.probe_r2 = probe;
        self.probe_theta = theta.to_vec();

        let r2 = if self.probe_own {
            &self.probe_r2
        } else {
            &self.base_r2
        };
        let n = self.x.len();
        let sv = theta[dim].exp();
        let noise = theta[dim + 1].exp();
        let mut k = DMatrix::zeros(n, n);
        let mut p = 0;
        for j in 0..n {
            k[(j, j)] = sv + noise;
            let col = &mut k.as_mut_slice()[j * n..(j + 1) * n];
            for v in &mut col[j + 1..] {
                *v = matern52_from_r2(r2[p], sv);
                p += 1;
            }
        }
        match cholesky_with_jitter(&k) {
            Ok((l, _)) => lml_from_factor(&l, self.y),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Makes the last probed point the base for incremental updates.
    fn accept(&mut self, theta: &[f64]) {
        if self.probe_theta != theta {
            return;
        }
        if self.probe_own {
            std::mem::swap(&mut self.base_r2, &mut self.probe_r2);
            self.probe_own = false;
        }
        self.base_theta = theta.to_vec();
    }
}

/// Greedy bounded coordinate search maximizing the likelihood. Each coordinate
/// is probed at `±step`; after a sweep with no improvement the step is halved.
fn coordinate_search(
    f: &mut LmlSearch<'_>,
    mut theta: Vec<f64>,
    bounds: &[(f64, f64)],
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let mut best = f.value(&theta);
    f.accept(&theta);
    let mut evals = 1;
    let mut step = 1.0;
    while evals < max_evals && step >= 1e-3 {
        let mut improved = false;
        'coords: for i in 0..theta.len() {
            for dir in [1.0, -1.0] {
                if evals >= max_evals {
                    break 'coords;
                }
                let old = theta[i];
                let cand = (old + dir * step).clamp(bounds[i].0, bounds[i].1);
                if cand == old {
                    continue;
                }
                theta[i] = cand;
                let v = f.value(&theta);
                evals += 1;
                if v > best {
                    f.accept(&theta);
                    best = v;
                    improved = true;
                    break;
                }
                theta[i] = old;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (theta, best)
}
