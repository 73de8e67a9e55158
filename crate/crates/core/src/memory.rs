//! Basin memory: clusters of evaluated points used to pick restart locations.
//!
//! The history is partitioned with seeded k-means. Each basin is summarized by
//! its best value `q_k` and size `n_k`; basins whose quality is within
//! `gamma * sigma_q` of the best are scored by
//! `w_e * ln(1 + 1/(n_k + 1)) + w_p * exp(-(q_k - q_best) / sigma_q)` and the
//! best member of the top-scoring basin becomes the restart point.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{History, RunSeed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasinConfig {
    /// Target number of basins.
    pub k: usize,
    /// Evaluations between reclusterings.
    pub tau_recluster: usize,
    /// Filter width in units of `sigma_q`.
    pub gamma: f64,
    pub w_e: f64,
    pub w_p: f64,
    pub sigma_floor: f64,
    pub max_iter: usize,
    /// Half-width of a uniform perturbation applied to memory restart
    /// centers, in normalized units. Zero restarts at the stored point.
    pub restart_perturbation: f64,
}

impl Default for BasinConfig {
    fn default() -> Self {
        Self {
            k: 10,
            tau_recluster: 50,
            gamma: 1.0,
            w_e: 0.3,
            w_p: 0.7,
            sigma_floor: 1e-12,
            max_iter: 100,
            restart_perturbation: 0.0,
        }
    }
}

impl BasinConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!("basin k must be >= 2, got {}", self.k)));
        }
        if self.tau_recluster < 1 {
            return Err(Error::InvalidConfig("tau_recluster must be >= 1".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.w_e.is_finite() && self.w_p.is_finite()) {
            return Err(Error::InvalidConfig("basin weights must be finite".into()));
        }
        if !(0.0..=0.5).contains(&self.restart_perturbation) {
            return Err(Error::InvalidConfig(format!(
                "restart_perturbation must lie in [0, 0.5], got {}",
                self.restart_perturbation
            )));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::InvalidConfig("sigma_floor must be > 0".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinSummary {
    pub basin_id: usize,
    /// Indices into the history, ascending.
    pub member_indices: Vec<usize>,
    pub q: f64,
    pub n: usize,
    pub centroid: Vec<f64>,
    /// History index of the first member attaining `q`.
    pub best_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinSnapshot {
    pub basins: Vec<BasinSummary>,
    pub q_best: f64,
    /// Population standard deviation of the basin qualities (unfloored).
    pub sigma_q: f64,
    /// History length when the snapshot was built.
    pub created_at_eval: usize,
}

impl BasinSnapshot {
    /// Builds a snapshot from a hard assignment of history records.
    /// Labels need not be contiguous; basins are numbered by ascending label.
    pub fn from_assignment(history: &History, labels: &[usize], created_at_eval: usize) -> Result<Self> {
        let records = history.records();
        if labels.len() != records.len() {
            return Err(Error::DimensionMismatch {
                expected: records.len(),
                actual: labels.len(),
            });
        }
        if records.is_empty() {
            return Err(Error::InsufficientData(0));
        }
        let max_label = labels.iter().copied().max().unwrap_or(0);
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); max_label + 1];
        for (i, &l) in labels.iter().enumerate() {
            groups[l].push(i);
        }
        let dim = records[0].x_norm.len();
        let basins = groups
            .into_iter()
            .filter(|g| !g.is_empty())
            .enumerate()
            .map(|(basin_id, members)| {
                let mut centroid = vec![0.0; dim];
                let mut best_index = members[0];
                for &i in &members {
                    for (c, x) in centroid.iter_mut().zip(&records[i].x_norm) {
                        *c += x;
                    }
                    if records[i].y < records[best_index].y {
                        best_index = i;
                    }
                }
                let n = members.len();
                centroid.iter_mut().for_each(|c| *c /= n as f64);
                BasinSummary {
                    basin_id,
                    q: records[best_index].y,
                    n,
                    centroid,
                    best_index,
                    member_indices: members,
                }
            })
            .collect();
        Ok(Self::from_basins(basins, created_at_eval))
    }

    /// Computes `q_best` and `sigma_q` for given basin summaries.
    pub fn from_basins(basins: Vec<BasinSummary>, created_at_eval: usize) -> Self {
        let qs: Vec<f64> = basins.iter().map(|b| b.q).collect();
        let q_best = qs.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = qs.iter().sum::<f64>() / qs.len() as f64;
        let var = qs.iter().map(|q| (q - mean) * (q - mean)).sum::<f64>() / qs.len() as f64;
        Self {
            basins,
            q_best,
            sigma_q: var.sqrt(),
            created_at_eval,
        }
    }

    pub fn sigma_effective(&self, floor: f64) -> f64 {
        self.sigma_q.max(floor)
    }

    pub fn basin(&self, id: usize) -> Option<&BasinSummary> {
        self.basins.iter().find(|b| b.basin_id == id)
    }
}

/// Partitions the history with k-means on normalized points.
pub fn cluster_basins(history: &History, config: &BasinConfig, seed: RunSeed) -> Result<BasinSnapshot> {
    let points: Vec<&[f64]> = history.records().iter().map(|r| r.x_norm.as_slice()).collect();
    if points.len() < 2 {
        return Err(Error::InsufficientData(points.len()));
    }
    let labels = kmeans(&points, config.k, config.max_iter, seed).0;
    BasinSnapshot::from_assignment(history, &labels, history.len())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn count_distinct(points: &[&[f64]], limit: usize) -> usize {
    let mut distinct: Vec<&[f64]> = Vec::new();
    for p in points {
        if !distinct.iter().any(|q| q == p) {
            distinct.push(p);
            if distinct.len() >= limit {
                break;
            }
        }
    }
    distinct.len()
}

/// Lloyd's algorithm with k-means++ seeding. Uses `min(k, #distinct points)`
/// centers; nearest-center ties go to the lower index. Returns labels and
/// centroids.
pub fn kmeans(points: &[&[f64]], k: usize, max_iter: usize, seed: RunSeed) -> (Vec<usize>, Vec<Vec<f64>>) {
    let n = points.len();
    let k_eff = count_distinct(points, k.max(1));
    let mut rng = seed.rng();

    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k_eff {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            pick = Some(i);
            if target < w {
                break;
            }
            target -= w;
        }
        let c = points[pick.expect("a point with positive distance exists")].to_vec();
        for (di, p) in d2.iter_mut().zip(points) {
            *di = di.min(sq_dist(p, &c));
        }
        centers.push(c);
    }

    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (j, c) in centers.iter().enumerate() {
                    let d = sq_dist(p, c);
                    if d < best_d {
                        best_d = d;
                        best = j;
                    }
                }
                best
            })
            .collect()
    };

    let dim = points[0].len();
    let mut labels = assign(&centers);
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; dim]; k_eff];
        let mut counts = vec![0usize; k_eff];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for j in 0..k_eff {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    (labels, centers)
}

/// Ids of basins with `q_k <= q_best + gamma * sigma_q`.
pub fn filter_basins(snapshot: &BasinSnapshot, gamma: f64, sigma_floor: f64) -> Vec<usize> {
    let threshold = snapshot.q_best + gamma * snapshot.sigma_effective(sigma_floor);
    snapshot
        .basins
        .iter()
        .filter(|b| b.q <= threshold)
        .map(|b| b.basin_id)
        .collect()
}

pub fn basin_score(q: f64, n: usize, q_best: f64, sigma: f64, w_e: f64, w_p: f64) -> f64 {
    w_e * (1.0 + 1.0 / (n as f64 + 1.0)).ln() + w_p * (-(q - q_best) / sigma).exp()
}

/// `(basin_id, score)` for each kept basin, in the order given.
pub fn score_basins(
    snapshot: &BasinSnapshot,
    kept: &[usize],
    w_e: f64,
    w_p: f64,
    sigma_floor: f64,
) -> Vec<(usize, f64)> {
    let sigma = snapshot.sigma_effective(sigma_floor);
    kept.iter()
        .filter_map(|&id| snapshot.basin(id))
        .map(|b| (b.basin_id, basin_score(b.q, b.n, snapshot.q_best, sigma, w_e, w_p)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartChoice {
    pub x_norm: Vec<f64>,
    pub y: f64,
    pub eval_index: usize,
    /// `None` when no basin survived filtering and the global best was used.
    pub basin_id: Option<usize>,
    pub score: Option<f64>,
}

/// Best point of the highest-scoring kept basin (ties to the smaller id),
/// or the global best when nothing is kept.
pub fn select_restart(snapshot: &BasinSnapshot, history: &History, config: &BasinConfig) -> Result<RestartChoice> {
    let kept = filter_basins(snapshot, config.gamma, config.sigma_floor);
    let scores = score_basins(snapshot, &kept, config.w_e, config.w_p, config.sigma_floor);
    let mut best: Option<(usize, f64)> = None;
    for (id, s) in scores {
        match best {
            Some((bid, bs)) if s < bs || (s == bs && id > bid) => {}
            _ => best = Some((id, s)),
        }
    }
    let records = history.records();
    match best {
        Some((id, s)) => {
            let basin = snapshot.basin(id).expect("scored basin exists");
            let rec = records
                .get(basin.best_index)
                .ok_or(Error::InsufficientData(records.len()))?;
            Ok(RestartChoice {
                x_norm: rec.x_norm.clone(),
                y: rec.y,
                eval_index: rec.eval_index,
                basin_id: Some(id),
                score: Some(s),
            })
        }
        None => {
            let rec = history.best().ok_or(Error::InsufficientData(0))?;
            Ok(RestartChoice {
                x_norm: rec.x_norm.clone(),
                y: rec.y,
                eval_index: rec.eval_index,
                basin_id: None,
                score: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{EvaluationRecord, Phase};
    use proptest::prelude::*;
    use rand::Rng;

    fn history_from(points: &[(Vec<f64>, f64)]) -> History {
        let mut h = History::new();
        for (i, (x, y)) in points.iter().enumerate() {
            h.record(EvaluationRecord {
                x_norm: x.clone(),
                y: *y,
                eval_index: i + 1,
                region_id: None,
                phase: Phase::Init,
                compliance: None,
            })
            .unwrap();
        }
        h
    }

    fn summary(id: usize, q: f64, n: usize) -> BasinSummary {
        BasinSummary {
            basin_id: id,
            member_indices: (0..n).collect(),
            q,
            n,
            centroid: vec![0.5],
            best_index: 0,
        }
    }

    #[test]
    fn sigma_and_threshold_example() {
        let s = BasinSnapshot::from_basins(vec![summary(0, 1.0, 10), summary(1, 1.3, 2), summary(2, 2.4, 5)], 0);
        assert_eq!(s.q_best, 1.0);
        assert!((s.sigma_q - 0.6018).abs() < 1e-4);
        assert!((s.q_best + s.sigma_q - 1.6018).abs() < 1e-4);
        assert_eq!(filter_basins(&s, 1.0, 1e-12), vec![0, 1]);
        assert_eq!(filter_basins(&s, 0.0, 1e-12), vec![0]);
    }

    #[test]
    fn score_example() {
        let s = BasinSnapshot::from_basins(vec![summary(0, 1.0, 10), summary(1, 1.3, 2), summary(2, 2.4, 5)], 0);
        let scores = score_basins(&s, &[0, 1], 0.3, 0.7, 1e-12);
        assert!((scores[0].1 - 0.7261).abs() < 1e-4);
        assert!((scores[1].1 - 0.5115).abs() < 1e-4);
        // Hand values use sigma rounded to 0.6018.
        let hand = 0.3 * (4.0f64 / 3.0).ln() + 0.7 * (-0.3f64 / 0.6018).exp();
        assert!((scores[1].1 - hand).abs() < 1e-4);
    }

    #[test]
    fn equal_qualities_keep_everything() {
        let s = BasinSnapshot::from_basins(vec![summary(0, 2.0, 3), summary(1, 2.0, 3)], 0);
        assert_eq!(s.sigma_q, 0.0);
        assert_eq!(filter_basins(&s, 1.0, 1e-12), vec![0, 1]);
        let sc = score_basins(&s, &[0, 1], 0.3, 0.7, 1e-12);
        assert_eq!(sc[0].1, sc[1].1);
    }

    #[test]
    fn restart_example_picks_best_member() {
        // Basin 0: indices 0..10 with best y=1.0 at index 4; basin 1: 10..12 (best 1.3);
        // basin 2: 12..17 (best 2.4).
        let mut pts = Vec::new();
        for i in 0..17 {
            let (x, y) = match i {
                0..=9 => (0.1 + 0.001 * i as f64, if i == 4 { 1.0 } else { 3.0 }),
                10..=11 => (0.5 + 0.001 * i as f64, if i == 11 { 1.3 } else { 3.0 }),
                _ => (0.9 + 0.001 * i as f64, if i == 12 { 2.4 } else { 3.0 }),
            };
            pts.push((vec![x], y));
        }
        let h = history_from(&pts);
        let labels: Vec<usize> = (0..17).map(|i| if i < 10 { 0 } else if i < 12 { 1 } else { 2 }).collect();
        let snap = BasinSnapshot::from_assignment(&h, &labels, 17).unwrap();
        assert_eq!(snap.basins[0].n, 10);
        let choice = select_restart(&snap, &h, &BasinConfig::default()).unwrap();
        assert_eq!(choice.basin_id, Some(0));
        assert_eq!(choice.eval_index, 5);
        assert_eq!(choice.x_norm, pts[4].0);
        assert!((choice.score.unwrap() - 0.7261).abs() < 1e-4);
    }

    #[test]
    fn restart_ties_to_earlier_member() {
        let h = history_from(&[(vec![0.1], 1.0), (vec![0.2], 0.5), (vec![0.3], 0.5)]);
        let snap = BasinSnapshot::from_assignment(&h, &[0, 0, 0], 3).unwrap();
        let choice = select_restart(&snap, &h, &BasinConfig::default()).unwrap();
        assert_eq!(choice.eval_index, 2);
    }

    #[test]
    fn empty_filter_falls_back_to_global_best() {
        let h = history_from(&[(vec![0.1], 1.0), (vec![0.9], 0.5)]);
        let mut snap = BasinSnapshot::from_assignment(&h, &[0, 1], 2).unwrap();
        // Force an inconsistent q_best so that no basin passes the filter.
        snap.q_best = -10.0;
        snap.sigma_q = 0.0;
        let choice = select_restart(&snap, &h, &BasinConfig::default()).unwrap();
        assert_eq!(choice.basin_id, None);
        assert_eq!(choice.eval_index, 2);
    }

    #[test]
    fn identical_points_form_one_basin() {
        let h = history_from(&vec![(vec![0.3, 0.3], 1.0); 12]);
        let snap = cluster_basins(&h, &BasinConfig::default(), RunSeed::new(1)).unwrap();
        assert_eq!(snap.basins.len(), 1);
        assert_eq!(snap.basins[0].n, 12);
    }

    #[test]
    fn too_little_data() {
        let h = history_from(&[(vec![0.3], 1.0)]);
        assert!(cluster_basins(&h, &BasinConfig::default(), RunSeed::new(1)).is_err());
    }

    /// Best contiguous split of sorted 1D data by within-group sum of squares.
    fn best_two_partition(xs: &[f64]) -> Vec<bool> {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        let sse = |idx: &[usize]| {
            let m = idx.iter().map(|&i| xs[i]).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&i| (xs[i] - m).powi(2)).sum::<f64>()
        };
        let mut best = (f64::INFINITY, 1);
        for cut in 1..xs.len() {
            let cost = sse(&order[..cut]) + sse(&order[cut..]);
            if cost < best.0 {
                best = (cost, cut);
            }
        }
        let mut left = vec![false; xs.len()];
        for &i in &order[..best.1] {
            left[i] = true;
        }
        left
    }

    #[test]
    fn two_groups_recovered() {
        let mut rng = RunSeed::new(5).rng();
        for trial in 0..20 {
            let mut xs = Vec::new();
            for i in 0..30 {
                let c = if (i + trial) % 3 == 0 { 0.9 } else { 0.1 };
                xs.push(c + rng.random_range(-0.01..0.01));
            }
            let pts: Vec<(Vec<f64>, f64)> = xs.iter().map(|&x| (vec![x], x)).collect();
            let h = history_from(&pts);
            let cfg = BasinConfig { k: 2, ..BasinConfig::default() };
            let snap = cluster_basins(&h, &cfg, RunSeed::new(trial as u64)).unwrap();
            assert_eq!(snap.basins.len(), 2);
            let oracle = best_two_partition(&xs);
            let first = &snap.basins[0].member_indices;
            let side = oracle[first[0]];
            let oracle_members: Vec<usize> = (0..xs.len()).filter(|&i| oracle[i] == side).collect();
            assert_eq!(first, &oracle_members);
        }
    }

    /// Independent evaluation of the filter/score/argmax rule.
    fn brute_force(qs: &[f64], ns: &[usize], gamma: f64) -> usize {
        let k = qs.len() as f64;
        let qb = qs.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = qs.iter().sum::<f64>() / k;
        let mut sigma = (qs.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / k).sqrt();
        if sigma < 1e-12 {
            sigma = 1e-12;
        }
        let mut best = usize::MAX;
        let mut best_s = f64::NEG_INFINITY;
        for i in 0..qs.len() {
            if qs[i] > qb + gamma * sigma {
                continue;
            }
            let s = 0.3 * (1.0 + 1.0 / (ns[i] as f64 + 1.0)).ln() + 0.7 * (-(qs[i] - qb) / sigma).exp();
            if s > best_s {
                best_s = s;
                best = i;
            }
        }
        best
    }

    proptest! {
        #[test]
        fn selection_matches_brute_force(
            basins in proptest::collection::vec((0.0f64..5.0, 1usize..30), 1..=6),
            gamma in 0.0f64..3.0,
        ) {
            let summaries: Vec<BasinSummary> = basins
                .iter()
                .enumerate()
                .map(|(i, &(q, n))| summary(i, q, n))
                .collect();
            let snap = BasinSnapshot::from_basins(summaries, 0);
            let qs: Vec<f64> = basins.iter().map(|b| b.0).collect();
            let ns: Vec<usize> = basins.iter().map(|b| b.1).collect();
            let cfg = BasinConfig { gamma, ..BasinConfig::default() };
            let kept = filter_basins(&snap, cfg.gamma, cfg.sigma_floor);
            let scores = score_basins(&snap, &kept, cfg.w_e, cfg.w_p, cfg.sigma_floor);
            let mut chosen = scores[0];
            for &(id, s) in &scores[1..] {
                if s > chosen.1 {
                    chosen = (id, s);
                }
            }
            prop_assert_eq!(chosen.0, brute_force(&qs, &ns, gamma));
        }

        #[test]
        fn partition_and_best_invariants(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, -5.0f64..5.0), 2..60),
            k in 2usize..8,
            seed in 0u64..1000,
        ) {
            let data: Vec<(Vec<f64>, f64)> = pts.iter().map(|&(a, b, y)| (vec![a, b], y)).collect();
            let h = history_from(&data);
            let cfg = BasinConfig { k, ..BasinConfig::default() };
            let snap = cluster_basins(&h, &cfg, RunSeed::new(seed)).unwrap();
            let total: usize = snap.basins.iter().map(|b| b.n).sum();
            prop_assert_eq!(total, h.len());
            let mut seen = vec![false; h.len()];
            for b in &snap.basins {
                prop_assert_eq!(b.n, b.member_indices.len());
                for &i in &b.member_indices {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
            }
            prop_assert_eq!(snap.q_best, h.best().unwrap().y);
            prop_assert!(snap.sigma_q >= 0.0);
            for gamma in [0.0, 0.5, 2.0] {
                let kept = filter_basins(&snap, gamma, cfg.sigma_floor);
                let best_basin = snap.basins.iter().find(|b| b.member_indices.contains(&h.best_index().unwrap())).unwrap();
                prop_assert!(kept.contains(&best_basin.basin_id));
            }
        }

        #[test]
        fn selection_invariant_to_score_rescaling(
            basins in proptest::collection::vec((0.0f64..5.0, 1usize..30), 1..=6),
            c in 0.01f64..100.0,
        ) {
            let summaries: Vec<BasinSummary> = basins
                .iter()
                .enumerate()
                .map(|(i, &(q, n))| summary(i, q, n))
                .collect();
            let snap = BasinSnapshot::from_basins(summaries, 0);
            let kept = filter_basins(&snap, 1.0, 1e-12);
            let a = score_basins(&snap, &kept, 0.3, 0.7, 1e-12);
            let b = score_basins(&snap, &kept, 0.3 * c, 0.7 * c, 1e-12);
            let pick = |s: &[(usize, f64)]| s.iter().fold(s[0], |acc, &x| if x.1 > acc.1 { x } else { acc }).0;
            prop_assert_eq!(pick(&a), pick(&b));
        }
    }
}
