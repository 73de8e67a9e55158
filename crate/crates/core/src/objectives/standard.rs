//! Classic multimodal test functions on their canonical boxes.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Evaluation, Objective, ObjectiveError};
use crate::error::{Error, Result};
use crate::space::SearchSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardKind {
    Ackley,
    Rastrigin,
    Levy,
}

impl StandardKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ackley => "ackley",
            Self::Rastrigin => "rastrigin",
            Self::Levy => "levy",
        }
    }

    /// Half-open canonical box `[-b, b]`.
    pub fn bound(self) -> f64 {
        match self {
            Self::Ackley => 32.768,
            Self::Rastrigin => 5.12,
            Self::Levy => 10.0,
        }
    }

    pub fn minimizer(self, dim: usize) -> Vec<f64> {
        match self {
            Self::Ackley | Self::Rastrigin => vec![0.0; dim],
            Self::Levy => vec![1.0; dim],
        }
    }
}

impl fmt::Display for StandardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StandardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ackley" => Ok(Self::Ackley),
            "rastrigin" => Ok(Self::Rastrigin),
            "levy" => Ok(Self::Levy),
            other => Err(Error::InvalidConfig(format!(
                "unknown standard function '{other}' (expected ackley, rastrigin or levy)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StandardFunction {
    kind: StandardKind,
    space: SearchSpace,
}

impl StandardFunction {
    pub fn new(kind: StandardKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be >= 1".into()));
        }
        let b = kind.bound();
        let space = SearchSpace::new(vec![-b; dim], vec![b; dim])?;
        Ok(Self { kind, space })
    }

    pub fn by_name(name: &str, dim: usize) -> Result<Self> {
        Self::new(name.parse()?, dim)
    }

    pub fn kind(&self) -> StandardKind {
        self.kind
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self.kind {
            StandardKind::Ackley => ackley(x),
            StandardKind::Rastrigin => rastrigin(x),
            StandardKind::Levy => levy(x),
        }
    }
}

impl Objective for StandardFunction {
    fn evaluate(&self, x_raw: &[f64]) -> Result<Evaluation, ObjectiveError> {
        self.space
            .normalize(x_raw)
            .map_err(|e| ObjectiveError::InvalidInput(e.to_string()))?;
        Ok(self.value(x_raw).into())
    }
}

pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

pub fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let first = (PI * w[0]).sin().powi(2);
    let middle: f64 = w[..d - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    let wd = w[d - 1];
    let last = (wd - 1.0).powi(2) * (1.0 + (2.0 * PI * wd).sin().powi(2));
    first + middle + last
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optima() {
        for d in [1, 2, 5, 14] {
            let a = StandardFunction::by_name("ackley", d).unwrap();
            assert!(a.evaluate(&vec![0.0; d]).unwrap().value.abs() < 1e-9);
            let r = StandardFunction::by_name("rastrigin", d).unwrap();
            assert_eq!(r.evaluate(&vec![0.0; d]).unwrap().value, 0.0);
            let l = StandardFunction::by_name("levy", d).unwrap();
            assert!(l.evaluate(&vec![1.0; d]).unwrap().value.abs() < 1e-24);
        }
    }

    #[test]
    fn known_values() {
        // Rastrigin at integer points: cos term is 1, so f = sum x^2.
        assert!((rastrigin(&[1.0, 2.0]) - 5.0).abs() < 1e-12);
        // Ackley at (1, 1): -20 exp(-0.2) - exp(1) + 20 + e.
        let expected = -20.0 * (-0.2f64).exp() + 20.0;
        assert!((ackley(&[1.0, 1.0]) - expected).abs() < 1e-12);
        // Levy, d = 1, x = 5: w = 2, sin^2(2 pi) + (1)(1 + sin^2(4 pi)) = 1.
        assert!((levy(&[5.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn positive_away_from_optimum_and_boxes() {
        let f = StandardFunction::new(StandardKind::Levy, 3).unwrap();
        assert!(f.value(&[0.0, 2.0, -3.0]) > 0.0);
        assert_eq!(f.space().lower(), &[-10.0; 3]);
        assert!(f.evaluate(&[11.0, 0.0, 0.0]).is_err());
        assert!(StandardFunction::by_name("sphere", 2).is_err());
        assert!(StandardFunction::by_name("ackley", 0).is_err());
        assert_eq!(
            StandardFunction::by_name("ackley", 2).unwrap().space().upper(),
            &[32.768, 32.768]
        );
    }
}
