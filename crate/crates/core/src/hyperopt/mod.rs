//! Hyperparameter search: sampling, asynchronous successive halving and
//! model-based proposals.

mod asha;
mod smbo;
mod space;
mod tune;

pub use asha::{asha_decide, Decision, Objective, SchedulerConfig};
pub use smbo::{candidates, expected_improvement, propose_with, smbo_propose, GpSurrogate, Surrogate, SurrogateState};
pub use space::{apply_config, Config, ParamSpec, SearchSpace};
pub use tune::{
    hyperparameter_table, tune, FnObjective, ModelObjective, Proposer, TrialObjective, TrialRun, TrialStatus, Trial, TuneConfig,
    TuneResult,
};
