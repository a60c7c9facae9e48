//! Threshold autoscaling with a cooldown and delayed scale completion.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingPolicy {
    pub base_replicas: usize,
    pub cpu_threshold: f64,
    pub queue_threshold: usize,
    /// Replica ceiling as a multiple of `base_replicas`.
    pub max_scale: usize,
    pub scale_up_step: usize,
    pub scale_down_threshold: f64,
    pub scale_down_step: usize,
    pub cooldown_seconds: f64,
    /// Delay between a scaling decision and the replicas becoming usable.
    pub scale_latency_seconds: f64,
}

impl Default for ScalingPolicy {
    fn default() -> Self {
        ScalingPolicy {
            base_replicas: 2,
            cpu_threshold: 0.75,
            queue_threshold: 100,
            max_scale: 5,
            scale_up_step: 1,
            scale_down_threshold: 0.4,
            scale_down_step: 1,
            cooldown_seconds: 60.0,
            scale_latency_seconds: 30.0,
        }
    }
}

impl ScalingPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_scale == 0 && self.base_replicas > 0 {
            return Err(invalid("max_scale must be at least 1"));
        }
        if !(self.cooldown_seconds >= 0.0) || !(self.scale_latency_seconds >= 0.0) {
            return Err(invalid("cooldown and scale latency must be non-negative"));
        }
        if self.scale_down_threshold > self.cpu_threshold {
            return Err(invalid("scale-down threshold above scale-up threshold"));
        }
        Ok(())
    }

    pub fn max_replicas(&self) -> usize {
        self.base_replicas * self.max_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub cpu_util: f64,
    pub queue_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleAction {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingState {
    /// Replicas currently able to serve.
    pub replicas: usize,
    /// Replica count once every pending change has landed.
    pub target: usize,
    pub last_action: Option<f64>,
    pending: VecDeque<(f64, usize)>,
}

impl ScalingState {
    pub fn new(policy: &ScalingPolicy) -> Self {
        ScalingState {
            replicas: policy.base_replicas,
            target: policy.base_replicas,
            last_action: None,
            pending: VecDeque::new(),
        }
    }

    /// Lands pending changes due at or before `now`.
    pub fn advance(&mut self, now: f64) {
        while let Some(&(at, replicas)) = self.pending.front() {
            if at > now {
                break;
            }
            self.replicas = replicas;
            self.pending.pop_front();
        }
    }

    /// Time the next pending change lands, if any.
    pub fn next_change(&self) -> Option<f64> {
        self.pending.front().map(|&(at, _)| at)
    }
}

/// One control-loop tick. Returns the action scheduled, if any; the new
/// replica count lands `scale_latency_seconds` later.
pub fn autoscale_step(
    policy: &ScalingPolicy,
    state: &mut ScalingState,
    observed: Observation,
    now: f64,
) -> Option<ScaleAction> {
    state.advance(now);
    if state.last_action.is_some_and(|t| now - t < policy.cooldown_seconds) {
        return None;
    }
    let (action, target) = if observed.cpu_util > policy.cpu_threshold || observed.queue_len > policy.queue_threshold {
        (ScaleAction::Up, (state.target + policy.scale_up_step).min(policy.max_replicas()))
    } else if observed.cpu_util < policy.scale_down_threshold {
        (ScaleAction::Down, state.target.saturating_sub(policy.scale_down_step).max(policy.base_replicas))
    } else {
        return None;
    };
    if target == state.target {
        return None;
    }
    state.target = target;
    state.last_action = Some(now);
    state.pending.push_back((now + policy.scale_latency_seconds, target));
    state.advance(now);
    Some(action)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(cpu_util: f64, queue_len: usize) -> Observation {
        Observation { cpu_util, queue_len }
    }

    #[test]
    fn scale_up_lands_after_latency() {
        let p = ScalingPolicy::default();
        let mut s = ScalingState::new(&p);
        assert_eq!(autoscale_step(&p, &mut s, obs(0.8, 0), 0.0), Some(ScaleAction::Up));
        assert_eq!(s.replicas, 2);
        s.advance(29.9);
        assert_eq!(s.replicas, 2);
        s.advance(30.0);
        assert_eq!(s.replicas, 3);
    }

    #[test]
    fn queue_trigger_is_or() {
        let p = ScalingPolicy::default();
        let mut s = ScalingState::new(&p);
        assert_eq!(autoscale_step(&p, &mut s, obs(0.1, 101), 0.0), Some(ScaleAction::Up));
        let mut s = ScalingState::new(&p);
        assert_eq!(autoscale_step(&p, &mut s, obs(0.5, 100), 0.0), None);
    }

    #[test]
    fn cap_and_cooldown() {
        let p = ScalingPolicy { scale_up_step: 100, ..Default::default() };
        let mut s = ScalingState::new(&p);
        autoscale_step(&p, &mut s, obs(0.99, 0), 0.0);
        s.advance(100.0);
        assert_eq!(s.replicas, 10);
        assert_eq!(autoscale_step(&p, &mut s, obs(0.99, 500), 100.0), None);
        assert_eq!(s.replicas, 10);

        let p = ScalingPolicy::default();
        let mut s = ScalingState::new(&p);
        autoscale_step(&p, &mut s, obs(0.9, 0), 0.0);
        assert_eq!(autoscale_step(&p, &mut s, obs(0.9, 0), 59.0), None);
        assert_eq!(autoscale_step(&p, &mut s, obs(0.9, 0), 60.0), Some(ScaleAction::Up));
    }

    #[test]
    fn never_below_base() {
        let p = ScalingPolicy::default();
        let mut s = ScalingState::new(&p);
        assert_eq!(autoscale_step(&p, &mut s, obs(0.0, 0), 0.0), None);
        assert_eq!(s.replicas, 2);
    }
}
