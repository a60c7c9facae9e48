use serde::{Deserialize, Serialize};

use super::allreduce::{ring_allreduce, ring_allreduce_threaded, TransferLog};
use crate::error::{invalid, Error, Result};
use crate::model::{FusionModel, Mode, Sample};

/// Workers holding round-robin shards of a dataset, with a virtual clock.
/// A pool of zero workers is idle and refuses epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerPool {
    n_rows: usize,
    shards: Vec<Vec<usize>>,
    /// Virtual seconds elapsed across completed epochs.
    pub clock: f64,
}

fn round_robin(n_rows: usize, p: usize) -> Vec<Vec<usize>> {
    let mut shards = vec![Vec::new(); p];
    if p == 0 {
        return shards;
    }
    for r in 0..n_rows {
        shards[r % p].push(r);
    }
    shards
}

impl WorkerPool {
    pub fn new(n_rows: usize, workers: usize) -> Self {
        WorkerPool { n_rows, shards: round_robin(n_rows, workers), clock: 0.0 }
    }

    pub fn workers(&self) -> usize {
        self.shards.len()
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    pub fn is_idle(&self) -> bool {
        self.shards.is_empty()
    }

    /// Re-shards round-robin by row index. Called only between epochs.
    pub fn resize(&mut self, workers: usize) {
        if workers != self.shards.len() {
            self.shards = round_robin(self.n_rows, workers);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParallelConfig {
    pub learning_rate: f64,
    /// Virtual seconds to process one row's forward and backward pass.
    pub compute_cost_per_row: f64,
    /// Virtual seconds to move one element between neighbours.
    pub cost_per_element: f64,
    pub threaded: bool,
}

impl Default for ParallelConfig {
    fn default() -> Self {
        ParallelConfig { learning_rate: 0.1, compute_cost_per_row: 1e-3, cost_per_element: 1e-7, threaded: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub workers: usize,
    pub loss: f64,
    pub serial_time: f64,
    pub parallel_time: f64,
    pub speedup: f64,
    pub transfers: TransferLog,
}

/// One full-batch gradient step. Each worker sums the loss gradients of its
/// shard (an empty shard contributes zeros), the sums are ring-all-reduced,
/// and the mean gradient is applied. Forward passes run in evaluation mode,
/// so the update equals the single-worker update for every pool size.
pub fn data_parallel_epoch(
    pool: &mut WorkerPool,
    model: &mut FusionModel,
    data: &[Sample],
    config: &ParallelConfig,
) -> Result<EpochReport> {
    if pool.is_idle() {
        return Err(Error::PoolIdle);
    }
    if data.len() != pool.n_rows {
        return Err(Error::Shape(format!("pool sharded {} rows, got {}", pool.n_rows, data.len())));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(config.learning_rate > 0.0) {
        return Err(invalid("learning_rate must be positive"));
    }

    let mut loss = 0.0;
    let mut local = Vec::with_capacity(pool.workers());
    for shard in &pool.shards {
        let mut acc = model.params.zeros_like();
        for &i in shard {
            let s = &data[i];
            let trace = model.forward(&s.statics, &s.series, Mode::Eval)?;
            loss += model.backward_into(&trace, s.label as f64, &mut acc).0;
        }
        local.push(acc.flatten());
    }
    let (summed, transfers) = if config.threaded {
        ring_allreduce_threaded(&local)?
    } else {
        ring_allreduce(&local)?
    };
    let n = data.len() as f64;
    let mut flat = model.params.flatten();
    for (w, g) in flat.iter_mut().zip(&summed[0]) {
        *w -= config.learning_rate * g / n;
    }
    model.params.assign_flat(&flat);

    let p = pool.workers();
    let longest = pool.shards.iter().map(Vec::len).max().unwrap_or(0) as f64;
    let chunk = flat.len().div_ceil(p) as f64;
    let comm_steps = 2.0 * (p as f64 - 1.0);
    let serial_time = n * config.compute_cost_per_row;
    let parallel_time = longest * config.compute_cost_per_row + comm_steps * chunk * config.cost_per_element;
    pool.clock += parallel_time;
    Ok(EpochReport {
        workers: p,
        loss: loss / n,
        serial_time,
        parallel_time,
        speedup: serial_time / parallel_time,
        transfers,
    })
}

/// Worker-count bounds plus a schedule of `(epoch, workers)` resize points
/// applied at epoch boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElasticPolicy {
    pub min_workers: usize,
    pub max_workers: usize,
    pub schedule: Vec<(usize, usize)>,
}

impl Default for ElasticPolicy {
    fn default() -> Self {
        ElasticPolicy { min_workers: 0, max_workers: 100, schedule: Vec::new() }
    }
}

impl ElasticPolicy {
    /// Workers for `epoch`: the latest scheduled size at or before it, clamped.
    pub fn workers_for(&self, epoch: usize, current: usize) -> usize {
        let target = self
            .schedule
            .iter()
            .filter(|(e, _)| *e <= epoch)
            .max_by_key(|(e, _)| *e)
            .map_or(current, |&(_, w)| w);
        target.clamp(self.min_workers, self.max_workers.max(self.min_workers))
    }
}

/// Runs `epochs` full-batch epochs, resizing the pool before each one as
/// the policy dictates.
pub fn train_elastic(
    pool: &mut WorkerPool,
    model: &mut FusionModel,
    data: &[Sample],
    config: &ParallelConfig,
    policy: &ElasticPolicy,
    epochs: usize,
) -> Result<Vec<EpochReport>> {
    let mut reports = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        pool.resize(policy.workers_for(epoch, pool.workers()));
        reports.push(data_parallel_epoch(pool, model, data, config)?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrainConfig;
    use crate::rng;
    use rand::Rng;

    fn data(n: usize) -> Vec<Sample> {
        let mut r = rng::seeded(3);
        (0..n)
            .map(|i| Sample {
                statics: vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)],
                series: (0..4).map(|_| r.gen_range(-1.0..1.0)).collect(),
                label: (i % 2) as u8,
            })
            .collect()
    }

    fn model() -> FusionModel {
        let cfg = TrainConfig { lstm_layers: 1, hidden_size: 3, mlp_hidden: vec![4], seed: 5, ..Default::default() };
        FusionModel::new(&cfg, 2).unwrap()
    }

    #[test]
    fn worker_count_invariance() {
        let d = data(23);
        let cfg = ParallelConfig::default();
        let mut reference = model();
        let mut pool = WorkerPool::new(d.len(), 1);
        for _ in 0..3 {
            data_parallel_epoch(&mut pool, &mut reference, &d, &cfg).unwrap();
        }
        for p in [2, 4, 7, 30] {
            let mut m = model();
            let mut pool = WorkerPool::new(d.len(), p);
            for _ in 0..3 {
                data_parallel_epoch(&mut pool, &mut m, &d, &cfg).unwrap();
            }
            for (a, b) in m.params.flatten().iter().zip(reference.params.flatten()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn speedup_and_clock() {
        let d = data(40);
        let mut m = model();
        let mut pool = WorkerPool::new(d.len(), 1);
        let r = data_parallel_epoch(&mut pool, &mut m, &d, &ParallelConfig::default()).unwrap();
        assert_eq!(r.speedup, 1.0);
        assert!(pool.clock > 0.0);
        pool.resize(4);
        let r = data_parallel_epoch(&mut pool, &mut m, &d, &ParallelConfig::default()).unwrap();
        assert!(r.speedup > 1.0 && r.parallel_time > 0.0);
    }

    #[test]
    fn idle_pool_refuses_epochs() {
        let d = data(4);
        let mut pool = WorkerPool::new(d.len(), 0);
        assert!(matches!(
            data_parallel_epoch(&mut pool, &mut model(), &d, &ParallelConfig::default()),
            Err(Error::PoolIdle)
        ));
    }

    #[test]
    fn resize_partitions_and_is_reversible() {
        let mut pool = WorkerPool::new(11, 2);
        let two = pool.shards().to_vec();
        pool.resize(2);
        assert_eq!(pool.shards(), &two[..]);
        pool.resize(4);
        let mut all: Vec<usize> = pool.shards().concat();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        pool.resize(2);
        assert_eq!(pool.shards(), &two[..]);
    }

    #[test]
    fn elastic_schedule() {
        let policy = ElasticPolicy { min_workers: 1, max_workers: 8, schedule: vec![(0, 2), (2, 16), (3, 0)] };
        assert_eq!(policy.workers_for(0, 5), 2);
        assert_eq!(policy.workers_for(1, 5), 2);
        assert_eq!(policy.workers_for(2, 5), 8);
        assert_eq!(policy.workers_for(3, 5), 1);
        let d = data(10);
        let mut pool = WorkerPool::new(d.len(), 1);
        let reports = train_elastic(&mut pool, &mut model(), &d, &ParallelConfig::default(), &policy, 4).unwrap();
        let sizes: Vec<usize> = reports.iter().map(|r| r.workers).collect();
        assert_eq!(sizes, vec![2, 2, 8, 1]);
    }
}
