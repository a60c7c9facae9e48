//! Trial scheduling as an event-ordered simulation in virtual epochs.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::asha::{asha_decide, Decision, SchedulerConfig};
use super::smbo::{smbo_propose, SurrogateState};
use super::space::{apply_config, Config, SearchSpace};
use crate::error::{invalid, Error, Result};
use crate::model::{FusionModel, Sample, TrainConfig, Trainer};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Running,
    Stopped,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: usize,
    pub config: Config,
    /// Metric after each epoch.
    pub history: Vec<f64>,
    /// `(epoch, metric)` at each rung the trial reached.
    pub rung_metrics: Vec<(usize, f64)>,
    pub status: TrialStatus,
    pub epochs: usize,
    pub error: Option<String>,
}

impl Trial {
    pub fn last_metric(&self) -> Option<f64> {
        self.history.last().copied()
    }
}

/// Produces one metric per call, each call being one more epoch of training.
pub trait TrialRun {
    fn step(&mut self) -> Result<f64>;
}

pub trait TrialObjective {
    fn start(&self, trial_id: usize, config: &Config) -> Result<Box<dyn TrialRun + '_>>;
}

/// Objective whose metric at epoch `e` (1-based) is `f(config, e)`.
pub struct FnObjective<F>(pub F);

struct FnRun<'a, F> {
    f: &'a F,
    config: Config,
    epoch: usize,
}

impl<F: Fn(&Config, usize) -> Result<f64>> TrialRun for FnRun<'_, F> {
    fn step(&mut self) -> Result<f64> {
        self.epoch += 1;
        (self.f)(&self.config, self.epoch)
    }
}

impl<F: Fn(&Config, usize) -> Result<f64>> TrialObjective for FnObjective<F> {
    fn start(&self, _trial_id: usize, config: &Config) -> Result<Box<dyn TrialRun + '_>> {
        Ok(Box::new(FnRun { f: &self.0, config: config.clone(), epoch: 0 }))
    }
}

/// Trains the fusion model; the metric is validation AUC after each epoch.
pub struct ModelObjective {
    pub train: Arc<[Sample]>,
    pub val: Arc<[Sample]>,
    pub base: TrainConfig,
}

struct ModelRun(Trainer);

impl TrialRun for ModelRun {
    fn step(&mut self) -> Result<f64> {
        self.0
            .run_epoch()?
            .val_auc
            .ok_or_else(|| invalid("validation set needs both classes"))
    }
}

impl TrialObjective for ModelObjective {
    fn start(&self, _trial_id: usize, config: &Config) -> Result<Box<dyn TrialRun + '_>> {
        let cfg = apply_config(config, &self.base);
        let static_dim = self.train.first().map_or(0, |s| s.statics.len());
        let model = FusionModel::new(&cfg, static_dim)?;
        Ok(Box::new(ModelRun(Trainer::new(model, self.train.clone(), self.val.clone())?)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proposer {
    Random,
    Smbo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub budget: usize,
    pub parallelism: usize,
    pub seed: u64,
    pub proposer: Proposer,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig { budget: 100, parallelism: 1, seed: 0, proposer: Proposer::Smbo }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub trials: Vec<Trial>,
    pub best: usize,
}

impl TuneResult {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }

    pub fn total_epochs(&self) -> usize {
        self.trials.iter().map(|t| t.epochs).sum()
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for t in &self.trials {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Runs `budget` trials with at most `parallelism` in flight. Each epoch
/// takes one unit of virtual time; events are processed in `(time, seq)`
/// order and rung decisions see only metrics recorded by earlier events.
pub fn tune<'a>(
    objective: &'a dyn TrialObjective,
    space: &SearchSpace,
    scheduler: &SchedulerConfig,
    config: &TuneConfig,
) -> Result<TuneResult> {
    space.validate()?;
    scheduler.validate()?;
    if config.budget == 0 || config.parallelism == 0 {
        return Err(invalid("budget and parallelism must be positive"));
    }
    let rungs = scheduler.rungs();
    let mut trials: Vec<Trial> = Vec::with_capacity(config.budget);
    let mut runs: Vec<Option<Box<dyn TrialRun + 'a>>> = Vec::with_capacity(config.budget);
    let mut surrogate = SurrogateState::new(scheduler.mode);
    let mut rung_records: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut events: BinaryHeap<Reverse<(u64, u64, usize)>> = BinaryHeap::new();
    let mut seq = 0u64;

    let launch = |time: u64,
                      seq: &mut u64,
                      trials: &mut Vec<Trial>,
                      runs: &mut Vec<Option<Box<dyn TrialRun + 'a>>>,
                      surrogate: &SurrogateState,
                      events: &mut BinaryHeap<Reverse<(u64, u64, usize)>>|
     -> Result<()> {
        let id = trials.len();
        let mut r = rng::stream(config.seed, id as u64);
        let cfg = match config.proposer {
            Proposer::Random => space.sample(&mut r),
            Proposer::Smbo => smbo_propose(surrogate, space, &mut r)?,
        };
        let mut trial = Trial {
            id,
            config: cfg.clone(),
            history: Vec::new(),
            rung_metrics: Vec::new(),
            status: TrialStatus::Running,
            epochs: 0,
            error: None,
        };
        match objective.start(id, &cfg) {
            Ok(run) => {
                runs.push(Some(run));
                events.push(Reverse((time + 1, *seq, id)));
                *seq += 1;
            }
            Err(e) => {
                trial.status = TrialStatus::Failed;
                trial.error = Some(e.to_string());
                runs.push(None);
            }
        }
        trials.push(trial);
        Ok(())
    };

    let mut in_flight = 0;
    while trials.len() < config.budget && in_flight < config.parallelism {
        launch(0, &mut seq, &mut trials, &mut runs, &surrogate, &mut events)?;
        in_flight = trials.iter().filter(|t| t.status == TrialStatus::Running).count();
    }

    while let Some(Reverse((time, _, id))) = events.pop() {
        let trial = &mut trials[id];
        let outcome = runs[id].as_mut().expect("running trial has a run").step();
        let finished = match outcome {
            Err(e) => {
                trial.status = TrialStatus::Failed;
                trial.error = Some(e.to_string());
                true
            }
            Ok(metric) => {
                trial.epochs += 1;
                trial.history.push(metric);
                let e = trial.epochs;
                if e >= scheduler.max_t {
                    trial.status = TrialStatus::Completed;
                    true
                } else if rungs.contains(&e) {
                    let recorded = rung_records.entry(e).or_default();
                    recorded.push(metric);
                    trial.rung_metrics.push((e, metric));
                    if asha_decide(scheduler, e, metric, recorded) == Decision::Stop {
                        trial.status = TrialStatus::Stopped;
                        true
                    } else {
                        false
                    }
                } else {
                    false
                }
            }
        };
        if finished {
            runs[id] = None;
            if let Some(m) = trials[id].last_metric() {
                surrogate.observe(trials[id].config.clone(), m);
            }
            // Refill the freed slot, skipping trials that fail to start.
            while trials.len() < config.budget {
                launch(time, &mut seq, &mut trials, &mut runs, &surrogate, &mut events)?;
                if trials.last().is_some_and(|t| t.status == TrialStatus::Running) {
                    break;
                }
            }
        } else {
            events.push(Reverse((time + 1, seq, id)));
            seq += 1;
        }
    }

    let best = trials
        .iter()
        .filter_map(|t| t.last_metric().map(|m| (t.id, m)))
        .fold(None::<(usize, f64)>, |acc, (id, m)| match acc {
            Some((_, b)) if !scheduler.at_least(m, b) || m == b => acc,
            _ => Some((id, m)),
        })
        .map(|(id, _)| id)
        .ok_or_else(|| Error::InvalidArgument("every trial failed".into()))?;
    Ok(TuneResult { trials, best })
}

/// Initial versus optimized values of the tuned training fields.
pub fn hyperparameter_table(initial: &TrainConfig, best: &Config) -> String {
    let tuned = apply_config(best, initial);
    let rows = [
        ("Learning Rate", format!("{}", initial.learning_rate), format!("{:.5}", tuned.learning_rate)),
        ("Batch Size", initial.batch_size.to_string(), tuned.batch_size.to_string()),
        ("LSTM Layers", initial.lstm_layers.to_string(), tuned.lstm_layers.to_string()),
        ("Dropout Rate", format!("{}", initial.dropout_rate), format!("{:.2}", tuned.dropout_rate)),
    ];
    let mut out = format!("{:<16}{:>16}{:>18}\n", "Hyperparameter", "Initial Value", "Optimized Value");
    for (name, a, b) in rows {
        out.push_str(&format!("{name:<16}{a:>16}{b:>18}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperopt::{Objective, ParamSpec};

    fn space() -> SearchSpace {
        SearchSpace { params: vec![ParamSpec::Uniform { name: "q".into(), lo: 0.0, hi: 1.0 }] }
    }

    fn quality_objective() -> FnObjective<impl Fn(&Config, usize) -> Result<f64>> {
        FnObjective(|c: &Config, e: usize| Ok(c["q"] * (1.0 - 1.0 / (e as f64 + 1.0))))
    }

    fn sched() -> SchedulerConfig {
        SchedulerConfig { max_t: 9, grace_period: 1, reduction_factor: 3, ..Default::default() }
    }

    #[test]
    fn budget_one() {
        let r = tune(&quality_objective(), &space(), &sched(), &TuneConfig { budget: 1, ..Default::default() }).unwrap();
        assert_eq!(r.trials.len(), 1);
        assert_eq!(r.best, 0);
        assert_eq!(r.trials[0].status, TrialStatus::Completed);
    }

    #[test]
    fn row_count_and_epoch_bound() {
        for parallelism in [1, 4] {
            let cfg = TuneConfig { budget: 20, parallelism, proposer: Proposer::Random, seed: 3 };
            let r = tune(&quality_objective(), &space(), &sched(), &cfg).unwrap();
            assert_eq!(r.trials.len(), 20);
            assert!(r.total_epochs() <= 20 * 9);
            assert!(r.trials.iter().all(|t| t.status != TrialStatus::Running));
            assert!(r.trials.iter().any(|t| t.status == TrialStatus::Stopped));
        }
    }

    #[test]
    fn reproducible_per_seed_and_parallelism() {
        let cfg = TuneConfig { budget: 12, parallelism: 3, proposer: Proposer::Smbo, seed: 8 };
        let a = tune(&quality_objective(), &space(), &sched(), &cfg).unwrap();
        let b = tune(&quality_objective(), &space(), &sched(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_rungs_means_full_training() {
        let s = SchedulerConfig { max_t: 4, grace_period: 4, ..Default::default() };
        let r = tune(&quality_objective(), &space(), &s, &TuneConfig { budget: 10, proposer: Proposer::Random, ..Default::default() })
            .unwrap();
        assert!(r.trials.iter().all(|t| t.status == TrialStatus::Completed && t.epochs == 4));
    }

    #[test]
    fn failures_are_recorded_and_skipped() {
        let obj = FnObjective(|c: &Config, _e: usize| {
            if c["q"] < 0.5 {
                Err(invalid("boom"))
            } else {
                Ok(c["q"])
            }
        });
        let r = tune(&obj, &space(), &sched(), &TuneConfig { budget: 10, proposer: Proposer::Random, ..Default::default() }).unwrap();
        assert_eq!(r.trials.len(), 10);
        assert!(r.trials.iter().any(|t| t.status == TrialStatus::Failed && t.error.is_some()));
        assert!(r.best_trial().config["q"] >= 0.5);
    }

    #[test]
    fn min_mode_best() {
        let s = SchedulerConfig { mode: Objective::Min, ..sched() };
        let r = tune(&quality_objective(), &space(), &s, &TuneConfig { budget: 8, proposer: Proposer::Random, ..Default::default() }).unwrap();
        let best = r.best_trial().last_metric().unwrap();
        assert!(r.trials.iter().filter_map(Trial::last_metric).all(|m| m >= best));
    }

    #[test]
    fn table_layout() {
        let best: Config = [("learning_rate".to_string(), 0.00137), ("batch_size".to_string(), 128.0)].into();
        let t = hyperparameter_table(&TrainConfig::untuned(), &best);
        assert!(t.starts_with("Hyperparameter"));
        assert!(t.contains("0.00137"));
        assert_eq!(t.lines().count(), 5);
    }
}
