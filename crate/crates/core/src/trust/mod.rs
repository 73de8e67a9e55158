//! Trust-region state machine and the surrogate-guided optimizer loops.

mod runner;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use runner::{
    run_bo, run_mg_turbo, run_multi_turbo, run_turbo, CandidateConfig, OptimizerConfig,
    RestartPolicy,
};

/// When a region counts as collapsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseRule {
    /// A contraction is triggered while already at `delta_min`.
    #[default]
    ContractAtMin,
    /// A contraction lands on `delta_min`.
    OnReach,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustRegionParams {
    pub delta_init: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub tau_succ: usize,
    pub tau_fail: usize,
    pub num_regions: usize,
    pub collapse_rule: CollapseRule,
}

impl Default for TrustRegionParams {
    fn default() -> Self {
        Self {
            delta_init: 0.8,
            delta_min: 0.5f64.powi(5),
            delta_max: 1.6,
            tau_succ: 2,
            tau_fail: 5,
            num_regions: 3,
            collapse_rule: CollapseRule::ContractAtMin,
        }
    }
}

impl TrustRegionParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta_min > 0.0
            && self.delta_min < self.delta_init
            && self.delta_init <= self.delta_max
            && self.delta_max.is_finite();
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "trust region sizes must satisfy 0 < delta_min < delta_init <= delta_max \
                 (got {}, {}, {})",
                self.delta_min, self.delta_init, self.delta_max
            )));
        }
        if self.tau_succ < 1 || self.tau_fail < 1 {
            return Err(Error::InvalidConfig("tau_succ and tau_fail must be >= 1".into()));
        }
        if self.num_regions < 1 {
            return Err(Error::InvalidConfig("num_regions must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionState {
    pub region_id: usize,
    /// Best point found by this region since its last restart.
    pub center: Vec<f64>,
    pub delta: f64,
    pub succ_count: usize,
    pub fail_count: usize,
    /// `+inf` until the region has a reference value.
    pub best_y: f64,
    pub restarts: usize,
    pub collapsed: bool,
}

impl TrustRegionState {
    pub fn new(region_id: usize, center: Vec<f64>, best_y: f64, params: &TrustRegionParams) -> Self {
        Self {
            region_id,
            center,
            delta: params.delta_init,
            succ_count: 0,
            fail_count: 0,
            best_y,
            restarts: 0,
            collapsed: false,
        }
    }

    /// Folds a new evaluation made by this region into its state and returns
    /// whether it improved on the region's best. The first evaluation after a
    /// restart without a known value only sets the reference.
    pub fn observe(&mut self, x_norm: &[f64], y: f64, params: &TrustRegionParams) -> bool {
        if self.best_y == f64::INFINITY {
            self.best_y = y;
            self.center = x_norm.to_vec();
            return false;
        }
        let improved = y < self.best_y;
        if improved {
            self.best_y = y;
            self.center = x_norm.to_vec();
        }
        *self = update_region(self, improved, params);
        improved
    }

    /// Re-initializes at `center` with `delta_init` and zeroed counters.
    pub fn restart(&mut self, center: Vec<f64>, best_y: Option<f64>, params: &TrustRegionParams) {
        self.center = center;
        self.best_y = best_y.unwrap_or(f64::INFINITY);
        self.delta = params.delta_init;
        self.succ_count = 0;
        self.fail_count = 0;
        self.collapsed = false;
        self.restarts += 1;
    }
}

/// Success/failure counter update with expansion and contraction.
pub fn update_region(state: &TrustRegionState, improved: bool, params: &TrustRegionParams) -> TrustRegionState {
    let mut next = state.clone();
    if improved {
        next.succ_count += 1;
        next.fail_count = 0;
        next.collapsed = false;
        if next.succ_count >= params.tau_succ {
            next.delta = params.delta_max.min(2.0 * next.delta);
            next.succ_count = 0;
        }
    } else {
        next.fail_count += 1;
        next.succ_count = 0;
        if next.fail_count >= params.tau_fail {
            next.fail_count = 0;
            let at_min = next.delta <= params.delta_min;
            next.delta = params.delta_min.max(next.delta / 2.0);
            next.collapsed = match params.collapse_rule {
                CollapseRule::ContractAtMin => at_min,
                CollapseRule::OnReach => next.delta <= params.delta_min,
            };
        }
    }
    next
}

pub fn is_collapsed(state: &TrustRegionState) -> bool {
    state.collapsed
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fresh(params: &TrustRegionParams) -> TrustRegionState {
        TrustRegionState::new(0, vec![0.5, 0.5], 1.0, params)
    }

    fn run(seq: &[bool], params: &TrustRegionParams) -> (Vec<f64>, TrustRegionState) {
        let mut s = fresh(params);
        let mut deltas = vec![];
        for &imp in seq {
            s = update_region(&s, imp, params);
            deltas.push(s.delta);
        }
        (deltas, s)
    }

    #[test]
    fn expands_after_two_successes() {
        let p = TrustRegionParams::default();
        let (d, s) = run(&[true, true], &p);
        assert_eq!(d, vec![0.8, 1.6]);
        assert_eq!(s.succ_count, 0);
        let (d, _) = run(&[true, true, true, true], &p);
        assert_eq!(d[3], 1.6);
    }

    #[test]
    fn contracts_from_sixteenth() {
        let p = TrustRegionParams::default();
        let mut s = fresh(&p);
        s.delta = 0.0625;
        for _ in 0..5 {
            s = update_region(&s, false, &p);
        }
        assert_eq!(s.delta, 0.03125);
        assert!(!is_collapsed(&s));
    }

    #[test]
    fn twenty_five_failures_reach_minimum() {
        let p = TrustRegionParams::default();
        let (d, s) = run(&[false; 25], &p);
        let hand = [0.4, 0.2, 0.1, 0.05, 0.03125];
        for (k, &h) in hand.iter().enumerate() {
            for i in 0..5 {
                let expected = if i < 4 { if k == 0 { 0.8 } else { hand[k - 1] } } else { h };
                assert_eq!(d[5 * k + i], expected, "step {}", 5 * k + i);
            }
        }
        assert_eq!(s.delta, 0.5f64.powi(5));
        assert!(!is_collapsed(&s));
        let (_, s30) = run(&[false; 30], &p);
        assert!(is_collapsed(&s30));
        assert_eq!(s30.delta, p.delta_min);
        let (_, s29) = run(&[false; 29], &p);
        assert!(!is_collapsed(&s29));
    }

    #[test]
    fn on_reach_rule_collapses_at_twenty_five() {
        let p = TrustRegionParams {
            collapse_rule: CollapseRule::OnReach,
            ..TrustRegionParams::default()
        };
        let (_, s24) = run(&[false; 24], &p);
        assert!(!is_collapsed(&s24));
        let (_, s25) = run(&[false; 25], &p);
        assert!(is_collapsed(&s25));
    }

    #[test]
    fn alternating_never_changes_delta() {
        let p = TrustRegionParams::default();
        let seq: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
        let (d, _) = run(&seq, &p);
        assert!(d.iter().all(|&x| x == 0.8));
    }

    #[test]
    fn improvement_at_minimum_prevents_collapse() {
        let p = TrustRegionParams::default();
        let mut seq = vec![false; 25];
        seq.push(true);
        seq.extend([false; 4]);
        let (_, s) = run(&seq, &p);
        assert!(!is_collapsed(&s));
        assert_eq!(s.delta, p.delta_min);
        assert_eq!(s.fail_count, 4);
    }

    #[test]
    fn observe_and_restart() {
        let p = TrustRegionParams::default();
        let mut s = fresh(&p);
        assert!(!s.observe(&[0.1, 0.1], 1.0, &p));
        assert_eq!(s.fail_count, 1);
        assert!(s.observe(&[0.2, 0.2], 0.5, &p));
        assert_eq!(s.center, vec![0.2, 0.2]);
        s.restart(vec![0.9, 0.9], None, &p);
        assert_eq!((s.delta, s.succ_count, s.fail_count, s.restarts), (0.8, 0, 0, 1));
        assert!(!s.observe(&[0.8, 0.8], 7.0, &p));
        assert_eq!((s.best_y, s.fail_count), (7.0, 0));
        assert_eq!(s.center, vec![0.8, 0.8]);
    }

    #[test]
    fn validation() {
        assert!(TrustRegionParams::default().validate().is_ok());
        let bad = TrustRegionParams { delta_min: 0.9, ..TrustRegionParams::default() };
        assert!(bad.validate().is_err());
        let bad = TrustRegionParams { tau_fail: 0, ..TrustRegionParams::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn delta_stays_in_bounds(seq in proptest::collection::vec(any::<bool>(), 0..300)) {
            let p = TrustRegionParams::default();
            let mut s = fresh(&p);
            for imp in seq {
                s = update_region(&s, imp, &p);
                prop_assert!(s.delta >= p.delta_min && s.delta <= p.delta_max);
                prop_assert!(s.succ_count < p.tau_succ && s.fail_count < p.tau_fail);
            }
        }

        #[test]
        fn best_y_non_increasing(ys in proptest::collection::vec(-10.0f64..10.0, 1..100)) {
            let p = TrustRegionParams::default();
            let mut s = fresh(&p);
            let mut prev = s.best_y;
            for y in ys {
                s.observe(&[0.3, 0.3], y, &p);
                prop_assert!(s.best_y <= prev);
                prev = s.best_y;
            }
        }
    }
}
