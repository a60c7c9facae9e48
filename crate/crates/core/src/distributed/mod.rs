//! Simulated data-parallel and federated training.

mod allreduce;
mod federated;
mod pool;

pub use allreduce::{ring_allreduce, ring_allreduce_threaded, Phase, TransferLog, TransferRecord};
pub use federated::{
    aggregate_updates, federated_round, AggregationMode, AggregationStats, EncryptionContext, FederatedRoundConfig,
    RoundReport,
};
pub use pool::{data_parallel_epoch, train_elastic, ElasticPolicy, EpochReport, ParallelConfig, WorkerPool};
