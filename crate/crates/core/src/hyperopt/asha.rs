//! Asynchronous successive halving.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub metric: String,
    pub mode: Objective,
    /// Most epochs any trial may run.
    pub max_t: usize,
    /// Epochs before the first stopping decision.
    pub grace_period: usize,
    pub reduction_factor: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            metric: "val_auc".into(),
            mode: Objective::Max,
            max_t: 27,
            grace_period: 1,
            reduction_factor: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Stop,
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reduction_factor < 2 {
            return Err(invalid("reduction_factor must be at least 2"));
        }
        if self.grace_period == 0 || self.max_t == 0 || self.grace_period > self.max_t {
            return Err(invalid("need 1 ≤ grace_period ≤ max_t"));
        }
        Ok(())
    }

    /// Epoch counts `grace · ηᵏ` strictly below `max_t` at which trials are compared.
    pub fn rungs(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut r = self.grace_period;
        while r < self.max_t {
            out.push(r);
            r = r.saturating_mul(self.reduction_factor);
        }
        out
    }

    /// `true` when `a` is at least as good as `b`.
    pub fn at_least(&self, a: f64, b: f64) -> bool {
        match self.mode {
            Objective::Max => a >= b,
            Objective::Min => a <= b,
        }
    }
}

/// Continue if the trial's metric at this rung is within the best
/// `⌈n/η⌉` of the `n` metrics recorded there (its own included); ties with
/// the cutoff continue. Epochs below the grace period always continue.
pub fn asha_decide(config: &SchedulerConfig, epoch: usize, metric: f64, rung_metrics: &[f64]) -> Decision {
    if epoch < config.grace_period || rung_metrics.len() <= 1 {
        return Decision::Continue;
    }
    let mut sorted = rung_metrics.to_vec();
    sorted.sort_by(|a, b| match config.mode {
        Objective::Max => b.total_cmp(a),
        Objective::Min => a.total_cmp(b),
    });
    let keep = sorted.len().div_ceil(config.reduction_factor);
    let cutoff = sorted[keep - 1];
    if config.at_least(metric, cutoff) {
        Decision::Continue
    } else {
        Decision::Stop
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(eta: usize, grace: usize) -> SchedulerConfig {
        SchedulerConfig { reduction_factor: eta, grace_period: grace, max_t: 16, ..Default::default() }
    }

    #[test]
    fn lone_trial_continues() {
        assert_eq!(asha_decide(&cfg(2, 1), 1, 0.1, &[0.1]), Decision::Continue);
    }

    #[test]
    fn halving_pair() {
        let c = cfg(2, 1);
        assert_eq!(asha_decide(&c, 1, 0.5, &[0.9, 0.5]), Decision::Stop);
        assert_eq!(asha_decide(&c, 1, 0.9, &[0.9, 0.5]), Decision::Continue);
    }

    #[test]
    fn grace_period_protects() {
        assert_eq!(asha_decide(&cfg(2, 4), 2, 0.0, &[1.0, 1.0, 0.0]), Decision::Continue);
    }

    #[test]
    fn ties_are_kept() {
        assert_eq!(asha_decide(&cfg(2, 1), 1, 0.5, &[0.5, 0.5, 0.5, 0.5]), Decision::Continue);
    }

    #[test]
    fn min_mode() {
        let c = SchedulerConfig { mode: Objective::Min, ..cfg(2, 1) };
        assert_eq!(asha_decide(&c, 1, 0.9, &[0.9, 0.5]), Decision::Stop);
    }

    #[test]
    fn rung_layout() {
        assert_eq!(SchedulerConfig { max_t: 27, grace_period: 1, reduction_factor: 3, ..Default::default() }.rungs(), vec![1, 3, 9]);
        assert!(SchedulerConfig { max_t: 5, grace_period: 5, ..Default::default() }.rungs().is_empty());
    }

    proptest! {
        #[test]
        fn improving_never_flips_to_stop(
            others in prop::collection::vec(0.0f64..1.0, 0..10),
            m in 0.0f64..1.0,
            bump in 0.0f64..0.5,
            eta in 2usize..5
        ) {
            let c = cfg(eta, 1);
            let mut before = others.clone();
            before.push(m);
            let mut after = others.clone();
            after.push(m + bump);
            if asha_decide(&c, 1, m, &before) == Decision::Continue {
                prop_assert_eq!(asha_decide(&c, 1, m + bump, &after), Decision::Continue);
            }
        }
    }
}
