//! Shared 2-D principal-component projection of all evaluated points.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{CliError, Result};
use crate::trace::{fmt_f64, TraceGroup};

#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit principal axes, by decreasing eigenvalue. Each axis has its
    /// largest-magnitude loading positive.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
}

impl Pca {
    /// Fits on the rows of `points` using the sample covariance.
    pub fn fit(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        let d = points.first().map_or(0, |p| p.len());
        if d < 2 {
            return Err(CliError::Analysis(format!("need dimension >= 2, got {d}")));
        }
        if points.iter().any(|p| p.len() != d) {
            return Err(CliError::Analysis("points differ in dimension".into()));
        }
        let mut distinct: Vec<&Vec<f64>> = points.iter().collect();
        distinct.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(CliError::Analysis(format!(
                "need at least 3 distinct points, got {}",
                distinct.len()
            )));
        }

        let mean: Vec<f64> = (0..d)
            .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let centered = DMatrix::from_fn(n, d, |i, j| points[i][j] - mean[j]);
        let cov = centered.tr_mul(&centered) / (n - 1) as f64;
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let components: Vec<Vec<f64>> = order
            .iter()
            .map(|&i| {
                let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                fix_sign(v)
            })
            .collect();
        let total: f64 = eigenvalues.iter().sum();
        let explained_ratio = eigenvalues
            .iter()
            .map(|l| if total > 0.0 { l / total } else { 0.0 })
            .collect();
        Ok(Self { mean, components, eigenvalues, explained_ratio })
    }

    pub fn project(&self, x: &[f64], component: usize) -> f64 {
        self.components[component]
            .iter()
            .zip(x.iter().zip(&self.mean))
            .map(|(c, (v, m))| c * (v - m))
            .sum()
    }
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub fn fix_sign(mut v: Vec<f64>) -> Vec<f64> {
    let mut k = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[k].abs() {
            k = i;
        }
    }
    if v[k] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoint {
    pub pc1: f64,
    pub pc2: f64,
    pub method: String,
    pub seed: Option<u64>,
    pub eval_index: usize,
    pub y: f64,
    /// The first row attaining its trace's minimum.
    pub is_best: bool,
}

pub fn project_groups(groups: &[TraceGroup]) -> Result<(Pca, Vec<ProjectedPoint>)> {
    let dims: Vec<usize> = groups
        .iter()
        .flat_map(|g| g.traces.iter().map(|t| t.dim()))
        .collect();
    if dims.windows(2).any(|w| w[0] != w[1]) {
        return Err(CliError::Analysis("traces have different dimensions".into()));
    }
    let points: Vec<Vec<f64>> = groups
        .iter()
        .flat_map(|g| g.traces.iter().flat_map(|t| t.rows.iter().map(|r| r.x.clone())))
        .collect();
    let pca = Pca::fit(&points)?;
    let mut out = Vec::with_capacity(points.len());
    for g in groups {
        for t in &g.traces {
            let best = t
                .rows
                .iter()
                .enumerate()
                .fold(None::<(usize, f64)>, |acc, (i, r)| match acc {
                    Some((_, y)) if y <= r.y => acc,
                    _ => Some((i, r.y)),
                })
                .map(|(i, _)| i);
            for (i, r) in t.rows.iter().enumerate() {
                out.push(ProjectedPoint {
                    pc1: pca.project(&r.x, 0),
                    pc2: pca.project(&r.x, 1),
                    method: g.label.clone(),
                    seed: t.seed,
                    eval_index: r.eval_index,
                    y: r.y,
                    is_best: best == Some(i),
                });
            }
        }
    }
    Ok((pca, out))
}

pub fn write_projection(points: &[ProjectedPoint], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pc1", "pc2", "method", "seed", "eval_index", "y", "is_best"])?;
    for p in points {
        w.write_record([
            fmt_f64(p.pc1),
            fmt_f64(p.pc2),
            p.method.clone(),
            p.seed.map(|s| s.to_string()).unwrap_or_default(),
            p.eval_index.to_string(),
            fmt_f64(p.y),
            p.is_best.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_explained(pca: &Pca, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["component", "eigenvalue", "explained_ratio"])?;
    for (i, (l, r)) in pca.eigenvalues.iter().zip(&pca.explained_ratio).enumerate() {
        w.write_record([format!("pc{}", i + 1), fmt_f64(*l), fmt_f64(*r)])?;
    }
    w.flush()?;
    Ok(())
}
