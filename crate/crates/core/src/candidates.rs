//! Scrambled Sobol candidate sets, over the whole unit cube or inside a trust
//! region box.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sobol_table::{DIRECTIONS, MAX_DEGREE};
use crate::space::RunSeed;

/// Highest dimension supported by the bundled direction numbers.
pub const MAX_SOBOL_DIM: usize = DIRECTIONS.len();

const BITS: usize = 32;

/// Default number of candidates per selection: `min(100 d, 5000)`.
pub fn default_candidate_count(dim: usize) -> usize {
    (100 * dim).min(5000)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrigin {
    Global,
    Region(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub points: Vec<Vec<f64>>,
    pub origin: CandidateOrigin,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sobol generator in Gray-code order with optional per-dimension scrambling.
#[derive(Debug, Clone)]
pub struct SobolEngine {
    directions: Vec<[u32; BITS]>,
    scramble: Option<Vec<u32>>,
}

impl SobolEngine {
    /// Plain (unscrambled) sequence; the first point is the origin.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_SOBOL_DIM {
            return Err(Error::SobolDimension {
                dim,
                max: MAX_SOBOL_DIM,
            });
        }
        Ok(Self {
            directions: (0..dim).map(direction_vector).collect(),
            scramble: None,
        })
    }

    /// Sequence with a seeded nested (Owen-style) scramble of each dimension.
    pub fn scrambled(dim: usize, seed: RunSeed) -> Result<Self> {
        let mut engine = Self::new(dim)?;
        let mut rng = seed.rng();
        engine.scramble = Some((0..dim).map(|_| rng.random::<u32>()).collect());
        Ok(engine)
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Writes point `index` of the sequence into `out`, coordinates in `[0, 1)`.
    pub fn fill_point(&self, index: u32, out: &mut [f64]) {
        let gray = index ^ (index >> 1);
        for (j, (v, o)) in self.directions.iter().zip(out.iter_mut()).enumerate() {
            let mut x = 0u32;
            let mut bits = gray;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                x ^= v[b];
                bits &= bits - 1;
            }
            if let Some(keys) = &self.scramble {
                x = owen_scramble_rev(x.reverse_bits(), keys[j]).reverse_bits();
            }
            *o = f64::from(x) / 4_294_967_296.0;
        }
    }

    pub fn point(&self, index: u32) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.fill_point(index, &mut out);
        out
    }

    pub fn points(&self, start: u32, n: usize) -> Vec<Vec<f64>> {
        (0..n as u32).map(|i| self.point(start + i)).collect()
    }
}

fn direction_vector(dim: usize) -> [u32; BITS] {
    let mut v = [0u64; BITS];
    if dim == 0 {
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = 1 << (BITS - 1 - j);
        }
    } else {
        let (poly, init) = DIRECTIONS[dim];
        let degree = (32 - poly.leading_zeros() - 1) as usize;
        debug_assert!(degree <= MAX_DEGREE);
        for j in 0..degree {
            v[j] = u64::from(init[j]);
        }
        for j in degree..BITS {
            let mut next = v[j - degree];
            let mut pow2 = 1u64;
            for k in 0..degree {
                pow2 <<= 1;
                if (poly >> (degree - 1 - k)) & 1 == 1 {
                    next ^= pow2 * v[j - k - 1];
                }
            }
            v[j] = next;
        }
        for (j, vj) in v.iter_mut().enumerate() {
            *vj <<= BITS - 1 - j;
        }
    }
    v.map(|x| x as u32)
}

/// Hash-based nested scramble on a bit-reversed integer: every operation only
/// carries information from low to high bits, so each output bit depends only
/// on the more significant bits of the original value.
fn owen_scramble_rev(mut x: u32, seed: u32) -> u32 {
    x ^= x.wrapping_mul(0x3d20_adea);
    x = x.wrapping_add(seed);
    x = x.wrapping_mul((seed >> 16) | 1);
    x ^= x.wrapping_mul(0x0552_6c56);
    x ^= x.wrapping_mul(0x53a2_2864);
    x
}

/// First `n` points of a seeded scrambled Sobol sequence in `[0, 1)^d`.
pub fn sobol(n: usize, dim: usize, seed: RunSeed) -> Result<CandidateSet> {
    let engine = SobolEngine::scrambled(dim, seed)?;
    Ok(CandidateSet {
        points: engine.points(0, n),
        origin: CandidateOrigin::Global,
    })
}

/// How per-dimension trust-region widths are set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxShape {
    /// Widths proportional to the surrogate lengthscales (geometric mean 1).
    #[default]
    Ard,
    Isotropic,
}

/// Axis-aligned box inside the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TrustBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&l, &u))| l <= v && v <= u)
    }
}

/// Per-dimension half-widths `(delta / 2) * w_j` before clipping.
pub fn half_widths(delta: f64, lengthscales: &[f64], shape: BoxShape) -> Result<Vec<f64>> {
    if let Some(bad) = lengthscales.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidConfig(format!(
            "lengthscales must be positive and finite, got {bad}"
        )));
    }
    Ok(match shape {
        BoxShape::Isotropic => vec![delta / 2.0; lengthscales.len()],
        BoxShape::Ard => {
            let log_mean =
                lengthscales.iter().map(|l| l.ln()).sum::<f64>() / lengthscales.len() as f64;
            let geo_mean = log_mean.exp();
            lengthscales
                .iter()
                .map(|l| delta / 2.0 * (l / geo_mean))
                .collect()
        }
    })
}

pub fn region_box(
    center: &[f64],
    delta: f64,
    lengthscales: &[f64],
    shape: BoxShape,
) -> Result<TrustBox> {
    if center.len() != lengthscales.len() {
        return Err(Error::DimensionMismatch {
            expected: center.len(),
            actual: lengthscales.len(),
        });
    }
    let half = half_widths(delta, lengthscales, shape)?;
    Ok(TrustBox {
        lower: center
            .iter()
            .zip(&half)
            .map(|(c, h)| (c - h).max(0.0))
            .collect(),
        upper: center
            .iter()
            .zip(&half)
            .map(|(c, h)| (c + h).min(1.0))
            .collect(),
    })
}

/// Scrambled Sobol points mapped into the clipped trust-region box.
pub fn region_candidates(
    center: &[f64],
    delta: f64,
    lengthscales: &[f64],
    n: usize,
    shape: BoxShape,
    region: usize,
    seed: RunSeed,
) -> Result<CandidateSet> {
    if let Some((j, &c)) = center.iter().enumerate().find(|(_, c)| !(0.0..=1.0).contains(*c)) {
        return Err(Error::OutOfBounds {
            index: j,
            value: c,
            lower: 0.0,
            upper: 1.0,
        });
    }
    let tr = region_box(center, delta, lengthscales, shape)?;
    let engine = SobolEngine::scrambled(center.len(), seed)?;
    let mut points = Vec::with_capacity(n);
    for i in 0..n as u32 {
        let mut p = engine.point(i);
        for ((x, l), u) in p.iter_mut().zip(&tr.lower).zip(&tr.upper) {
            *x = (l + (u - l) * *x).clamp(*l, *u);
        }
        points.push(p);
    }
    Ok(CandidateSet {
        points,
        origin: CandidateOrigin::Region(region),
    })
}
