//! Discrete-event serving simulation: Poisson arrivals over Zipf-popular
//! keys, a prediction cache, a replica pool with a FIFO queue, and the
//! autoscaler ticking on a fixed interval.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;

use rand::Rng as _;
use rand_distr::{Exp, Zipf};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::autoscale::{autoscale_step, Observation, ScaleAction, ScalingPolicy, ScalingState};
use super::cache::{CacheConfig, Lookup, LruTtlCache};
use crate::error::{invalid, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServiceTime {
    Fixed { seconds: f64 },
    Exponential { mean_seconds: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    /// Poisson arrival rate, requests per second.
    pub arrival_rate: f64,
    /// Stop after this many arrivals.
    pub requests: Option<usize>,
    /// Stop generating arrivals after this much virtual time.
    pub duration_seconds: Option<f64>,
    pub zipf_exponent: f64,
    pub n_keys: u64,
    pub service: ServiceTime,
    /// Requests arriving to a full queue are dropped; unbounded if `None`.
    pub queue_capacity: Option<usize>,
    pub tick_seconds: f64,
    /// Latency of a cache hit.
    pub cache_latency_seconds: f64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            arrival_rate: 50.0,
            requests: Some(10_000),
            duration_seconds: None,
            zipf_exponent: 1.0,
            n_keys: 1000,
            service: ServiceTime::Exponential { mean_seconds: 0.05 },
            queue_capacity: None,
            tick_seconds: 10.0,
            cache_latency_seconds: 0.0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate > 0.0) || !self.arrival_rate.is_finite() {
            return Err(invalid("arrival_rate must be positive"));
        }
        if self.requests.is_none() && self.duration_seconds.is_none() {
            return Err(invalid("workload needs a request count or a duration"));
        }
        if self.n_keys == 0 || !(self.zipf_exponent >= 0.0) {
            return Err(invalid("need at least one key and a non-negative Zipf exponent"));
        }
        if !(self.tick_seconds > 0.0) {
            return Err(invalid("tick_seconds must be positive"));
        }
        let ok = match self.service {
            ServiceTime::Fixed { seconds } => seconds >= 0.0,
            ServiceTime::Exponential { mean_seconds } => mean_seconds > 0.0,
        };
        if !ok {
            return Err(invalid("invalid service time"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub arrivals: u64,
    pub hits: u64,
    pub misses: u64,
    pub served: u64,
    pub dropped: u64,
    /// Requests waiting or in service when the simulation stopped.
    pub pending_at_end: u64,
    pub hit_rate: f64,
    /// Mean time misses spent queued before service.
    pub mean_wait: f64,
    pub mean_latency: f64,
    pub p50_latency: f64,
    pub p99_latency: f64,
    pub p999_latency: f64,
    /// Served requests per second of simulated time.
    pub throughput: f64,
    /// Most requests completed within any one-second window.
    pub peak_throughput: f64,
    pub end_time: f64,
    pub peak_replicas: usize,
    pub replica_trace: Vec<(f64, usize)>,
    pub scale_actions: Vec<(f64, ScaleAction)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub timestamp: f64,
    pub event: String,
    pub fields: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub metrics: SimMetrics,
    pub log: Vec<LogRecord>,
}

impl SimReport {
    pub fn write_log_jsonl(&self, mut out: impl Write) -> Result<()> {
        for r in &self.log {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Metric/value table with the serving metric names.
    pub fn serving_table(&self, policy: &ScalingPolicy) -> String {
        let m = &self.metrics;
        let rows = [
            ("Peak Processing Capacity (requests/second)", format!("{:.1}", m.peak_throughput)),
            ("Average Throughput (requests/second)", format!("{:.1}", m.throughput)),
            ("99.9% Request Response Time (ms)", format!("{:.1}", m.p999_latency * 1e3)),
            ("99% Request Response Time (ms)", format!("{:.1}", m.p99_latency * 1e3)),
            ("Median Request Response Time (ms)", format!("{:.1}", m.p50_latency * 1e3)),
            ("Cache Hit Rate (%)", format!("{:.1}", m.hit_rate * 100.0)),
            ("System Scaling Time (seconds)", format!("{:.0}", policy.scale_latency_seconds)),
            ("Peak Replicas", m.peak_replicas.to_string()),
        ];
        let mut out = format!("{:<46}{:>12}\n", "Metric", "Value");
        for (k, v) in rows {
            out.push_str(&format!("{k:<46}{v:>12}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Arrival,
    Done { arrived: f64, key: u64 },
    Tick,
    ScaleLands,
}

struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    /// Reversed so the max-heap pops the earliest `(time, seq)`.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct Queue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: f64, kind: Kind) {
        self.heap.push(Event { time, seq: self.seq, kind });
        self.seq += 1;
    }
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Runs the simulation. `predict` computes the model output for a key on
/// a cache miss.
pub fn simulate_service(
    predict: &mut dyn FnMut(u64) -> f64,
    workload: &WorkloadSpec,
    cache_cfg: &CacheConfig,
    policy: &ScalingPolicy,
    seed: u64,
) -> Result<SimReport> {
    workload.validate()?;
    policy.validate()?;
    let mut arrival_rng = rng::stream(seed, 1);
    let mut key_rng = rng::stream(seed, 2);
    let mut service_rng = rng::stream(seed, 3);
    let inter = Exp::new(workload.arrival_rate).map_err(|e| invalid(e.to_string()))?;
    let zipf = Zipf::new(workload.n_keys, workload.zipf_exponent).map_err(|e| invalid(e.to_string()))?;
    let service_exp = match workload.service {
        ServiceTime::Exponential { mean_seconds } => Some(Exp::new(1.0 / mean_seconds).map_err(|e| invalid(e.to_string()))?),
        ServiceTime::Fixed { .. } => None,
    };
    let mut service_time = || match (workload.service, &service_exp) {
        (ServiceTime::Fixed { seconds }, _) => seconds,
        (_, Some(e)) => service_rng.sample(e),
        _ => unreachable!(),
    };

    let mut cache: LruTtlCache<u64, f64> = LruTtlCache::new(*cache_cfg);
    let mut scaling = ScalingState::new(policy);
    let mut events = Queue { heap: BinaryHeap::new(), seq: 0 };
    let mut waiting: VecDeque<(f64, u64)> = VecDeque::new();
    let mut busy = 0usize;
    let mut arrivals = 0u64;
    let mut arrivals_done = false;
    let mut dropped = 0u64;
    let mut latencies: Vec<f64> = Vec::new();
    let mut completions: Vec<f64> = Vec::new();
    let mut waits: Vec<f64> = Vec::new();
    let mut busy_area = 0.0;
    let mut area_at_tick = 0.0;
    let mut last_time = 0.0;
    let mut now = 0.0;
    let mut log: Vec<LogRecord> = Vec::new();
    let mut replica_trace = vec![(0.0, scaling.replicas)];
    let mut scale_actions = Vec::new();

    events.push(arrival_rng.sample(inter), Kind::Arrival);
    events.push(workload.tick_seconds, Kind::Tick);

    while let Some(ev) = events.heap.pop() {
        now = ev.time;
        busy_area += busy as f64 * (now - last_time);
        last_time = now;
        match ev.kind {
            Kind::Arrival => {
                let past_duration = workload.duration_seconds.is_some_and(|d| now > d);
                if past_duration {
                    arrivals_done = true;
                    continue;
                }
                arrivals += 1;
                let key = key_rng.sample(zipf) as u64;
                match cache.get(&key, now) {
                    Lookup::Hit(_) => {
                        latencies.push(workload.cache_latency_seconds);
                        completions.push(now + workload.cache_latency_seconds);
                    }
                    Lookup::Miss => {
                        if workload.queue_capacity.is_some_and(|cap| waiting.len() >= cap) {
                            dropped += 1;
                        } else {
                            waiting.push_back((now, key));
                        }
                    }
                }
                if workload.requests.is_some_and(|n| arrivals >= n as u64) {
                    arrivals_done = true;
                } else {
                    events.push(now + arrival_rng.sample(inter), Kind::Arrival);
                }
            }
            Kind::Done { arrived, key } => {
                busy -= 1;
                let value = predict(key);
                cache.put(key, value, now);
                latencies.push(now - arrived);
                completions.push(now);
            }
            Kind::Tick => {
                let window = workload.tick_seconds * scaling.replicas.max(1) as f64;
                let cpu = if scaling.replicas == 0 { 0.0 } else { (busy_area - area_at_tick) / window };
                area_at_tick = busy_area;
                let observed = Observation { cpu_util: cpu, queue_len: waiting.len() };
                log.push(LogRecord {
                    timestamp: now,
                    event: "tick".into(),
                    fields: json!({ "cpu_util": cpu, "queue_len": waiting.len(), "replicas": scaling.replicas }),
                });
                if let Some(action) = autoscale_step(policy, &mut scaling, observed, now) {
                    scale_actions.push((now, action));
                    log.push(LogRecord {
                        timestamp: now,
                        event: "scale".into(),
                        fields: json!({ "action": action, "target": scaling.target }),
                    });
                    if let Some(at) = scaling.next_change() {
                        events.push(at, Kind::ScaleLands);
                    }
                }
                let keep_ticking = !arrivals_done || busy > 0 || (!waiting.is_empty() && scaling.target > 0);
                if keep_ticking {
                    events.push(now + workload.tick_seconds, Kind::Tick);
                }
            }
            Kind::ScaleLands => {
                let before = scaling.replicas;
                scaling.advance(now);
                if scaling.replicas != before {
                    replica_trace.push((now, scaling.replicas));
                    log.push(LogRecord {
                        timestamp: now,
                        event: "scale_landed".into(),
                        fields: json!({ "replicas": scaling.replicas }),
                    });
                }
            }
        }
        while busy < scaling.replicas {
            let Some((arrived, key)) = waiting.pop_front() else { break };
            busy += 1;
            waits.push(now - arrived);
            events.push(now + service_time(), Kind::Done { arrived, key });
        }
    }

    let served = latencies.len() as u64;
    let pending_at_end = waiting.len() as u64 + busy as u64;
    let mut sorted = latencies.clone();
    sorted.sort_by(f64::total_cmp);
    completions.sort_by(f64::total_cmp);
    let mut peak = 0usize;
    let mut lo = 0;
    for hi in 0..completions.len() {
        while completions[hi] - completions[lo] >= 1.0 {
            lo += 1;
        }
        peak = peak.max(hi - lo + 1);
    }
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let metrics = SimMetrics {
        arrivals,
        hits: cache.hits(),
        misses: cache.misses(),
        served,
        dropped,
        pending_at_end,
        hit_rate: if arrivals == 0 { 0.0 } else { cache.hits() as f64 / arrivals as f64 },
        mean_wait: mean(&waits),
        mean_latency: mean(&latencies),
        p50_latency: percentile(&sorted, 0.5),
        p99_latency: percentile(&sorted, 0.99),
        p999_latency: percentile(&sorted, 0.999),
        throughput: if now > 0.0 { served as f64 / now } else { 0.0 },
        peak_throughput: peak as f64,
        end_time: now,
        peak_replicas: replica_trace.iter().map(|&(_, r)| r).max().unwrap_or(0),
        replica_trace,
        scale_actions,
    };
    log.push(LogRecord {
        timestamp: now,
        event: "summary".into(),
        fields: json!({
            "arrivals": metrics.arrivals,
            "hits": metrics.hits,
            "misses": metrics.misses,
            "served": metrics.served,
            "dropped": metrics.dropped,
            "pending_at_end": metrics.pending_at_end,
        }),
    });
    Ok(SimReport { metrics, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(seconds: f64, requests: usize) -> WorkloadSpec {
        WorkloadSpec { service: ServiceTime::Fixed { seconds }, requests: Some(requests), ..Default::default() }
    }

    fn run(w: &WorkloadSpec, c: CacheConfig, p: ScalingPolicy, seed: u64) -> SimMetrics {
        simulate_service(&mut |k| k as f64, w, &c, &p, seed).unwrap().metrics
    }

    #[test]
    fn single_request() {
        let m = run(&fixed(0.05, 1), CacheConfig::default(), ScalingPolicy::default(), 0);
        assert_eq!(m.arrivals, 1);
        assert_eq!(m.hit_rate, 0.0);
        assert_eq!(m.p50_latency, 0.05);
    }

    #[test]
    fn single_key_hits_all_but_first() {
        // With a fixed service time the first miss completes before the next
        // arrival only if arrivals are slow, so use a slow rate.
        let w = WorkloadSpec { n_keys: 1, arrival_rate: 0.5, ..fixed(0.01, 200) };
        let c = CacheConfig { capacity: 10, ttl_seconds: f64::INFINITY };
        let m = run(&w, c, ScalingPolicy::default(), 1);
        assert_eq!(m.hits, 199);
        assert_eq!(m.misses, 1);
    }

    #[test]
    fn conservation_and_determinism() {
        let w = WorkloadSpec { arrival_rate: 200.0, queue_capacity: Some(50), ..fixed(0.05, 5000) };
        let a = run(&w, CacheConfig { capacity: 50, ..Default::default() }, ScalingPolicy::default(), 3);
        assert_eq!(a.hits + a.misses, a.arrivals);
        assert_eq!(a.served + a.pending_at_end + a.dropped, a.arrivals);
        assert!(a.dropped > 0);
        assert_eq!(a, run(&w, CacheConfig { capacity: 50, ..Default::default() }, ScalingPolicy::default(), 3));
    }

    #[test]
    fn zero_replicas_queue_everything() {
        let p = ScalingPolicy { base_replicas: 0, max_scale: 0, ..Default::default() };
        let m = run(&fixed(0.05, 100), CacheConfig { capacity: 0, ..Default::default() }, p, 4);
        assert_eq!(m.served, 0);
        assert_eq!(m.pending_at_end, 100);
    }

    #[test]
    fn overload_triggers_scale_up_within_cap() {
        let w = WorkloadSpec { arrival_rate: 400.0, ..fixed(0.05, 40_000) };
        let p = ScalingPolicy::default();
        let m = run(&w, CacheConfig { capacity: 0, ..Default::default() }, p, 5);
        assert!(m.scale_actions.iter().any(|(_, a)| *a == ScaleAction::Up));
        assert!(m.replica_trace.iter().all(|&(_, r)| (2..=10).contains(&r)));
        for pair in m.scale_actions.windows(2) {
            assert!(pair[1].0 - pair[0].0 >= p.cooldown_seconds);
        }
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.5), 500.0);
        assert_eq!(percentile(&v, 0.999), 999.0);
        assert_eq!(percentile(&[3.0], 0.99), 3.0);
    }
}
