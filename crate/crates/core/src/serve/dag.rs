//! Sequential stage orchestration with retries, timeouts and a periodic
//! health probe, timed on a virtual clock.

use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng;

pub const STAGE_NAMES: [&str; 5] = [
    "data_acquisition",
    "preprocessing",
    "feature_engineering",
    "model_training",
    "model_evaluation",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StagePolicy {
    /// Retries after the first attempt.
    pub retry_limit: usize,
    pub timeout_seconds: f64,
    pub probe_interval_seconds: f64,
    /// Each probe fires up to this much after its nominal time.
    pub probe_jitter_seconds: f64,
}

impl Default for StagePolicy {
    fn default() -> Self {
        StagePolicy {
            retry_limit: 1,
            timeout_seconds: 12.0 * 3600.0,
            probe_interval_seconds: 45.0,
            probe_jitter_seconds: 5.0,
        }
    }
}

impl StagePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.probe_interval_seconds > 0.0) || !(self.timeout_seconds > 0.0) {
            return Err(invalid("probe interval and timeout must be positive"));
        }
        if !(0.0..self.probe_interval_seconds).contains(&self.probe_jitter_seconds) {
            return Err(invalid("probe jitter must be in [0, probe interval)"));
        }
        Ok(())
    }
}

pub struct StageContext<'a> {
    pub name: &'a str,
    /// 1-based.
    pub attempt: usize,
    pub workdir: &'a Path,
    /// Files produced by the previous stage.
    pub inputs: &'a [PathBuf],
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskOutcome {
    Success { outputs: Vec<PathBuf>, virtual_seconds: f64 },
    /// The task crashed `after_seconds` into the attempt.
    Failure { error: String, after_seconds: f64 },
    /// The task stopped making progress `after_seconds` into the attempt.
    Hang { after_seconds: f64 },
}

pub type Task<'a> = Box<dyn FnMut(&StageContext) -> TaskOutcome + 'a>;

pub struct Stage<'a> {
    pub name: String,
    pub policy: StagePolicy,
    task: Task<'a>,
}

pub struct PipelineDag<'a> {
    pub workdir: PathBuf,
    pub seed: u64,
    stages: Vec<Stage<'a>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Success,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub status: StageStatus,
    pub attempts: usize,
    pub virtual_seconds: f64,
    /// Time from the last fault to its detection.
    pub fault_detection_seconds: Option<f64>,
    pub error: Option<String>,
    /// Output files, relative to the working directory.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stages: Vec<StageReport>,
}

impl PipelineReport {
    pub fn succeeded(&self) -> bool {
        self.stages.iter().all(|s| s.status == StageStatus::Success)
    }

    pub fn total_seconds(&self) -> f64 {
        self.stages.iter().map(|s| s.virtual_seconds).sum()
    }

    /// Per-stage virtual hours and status, with a total row.
    pub fn stage_table(&self) -> String {
        let mut out = format!("{:<22}{:>10}{:>10}{:>18}\n", "Stage", "Status", "Attempts", "Time (hours)");
        for s in &self.stages {
            let status = match s.status {
                StageStatus::Success => "success",
                StageStatus::Failed => "failed",
                StageStatus::Skipped => "skipped",
            };
            out.push_str(&format!(
                "{:<22}{:>10}{:>10}{:>18.4}\n",
                s.name,
                status,
                s.attempts,
                s.virtual_seconds / 3600.0
            ));
        }
        out.push_str(&format!("{:<22}{:>10}{:>10}{:>18.4}\n", "Total", "", "", self.total_seconds() / 3600.0));
        out
    }
}

impl<'a> PipelineDag<'a> {
    pub fn new(workdir: impl Into<PathBuf>, seed: u64) -> Self {
        PipelineDag { workdir: workdir.into(), seed, stages: Vec::new() }
    }

    pub fn add_stage(&mut self, name: &str, policy: StagePolicy, task: impl FnMut(&StageContext) -> TaskOutcome + 'a) {
        self.stages.push(Stage { name: name.to_string(), policy, task: Box::new(task) });
    }

    pub fn stage_names(&self) -> Vec<&str> {
        self.stages.iter().map(|s| s.name.as_str()).collect()
    }
}

/// First probe strictly after `onset`. Probe `k ≥ 1` fires at
/// `k·interval + U[0, jitter)` from the attempt start.
fn detect(policy: &StagePolicy, onset: f64, rng: &mut rng::Rng) -> f64 {
    let mut k = 1.0;
    loop {
        let jitter = if policy.probe_jitter_seconds > 0.0 {
            rng.gen_range(0.0..policy.probe_jitter_seconds)
        } else {
            0.0
        };
        let t = k * policy.probe_interval_seconds + jitter;
        if t > onset {
            return t;
        }
        k += 1.0;
    }
}

/// Runs stages in order. A stage runs only after its predecessor succeeds;
/// after a final failure every later stage is reported as skipped.
pub fn run_pipeline(dag: &mut PipelineDag) -> Result<PipelineReport> {
    for s in &dag.stages {
        s.policy.validate()?;
    }
    let mut reports = Vec::with_capacity(dag.stages.len());
    let mut inputs: Vec<PathBuf> = Vec::new();
    let mut blocked = false;
    for (index, stage) in dag.stages.iter_mut().enumerate() {
        let mut report = StageReport {
            name: stage.name.clone(),
            status: StageStatus::Skipped,
            attempts: 0,
            virtual_seconds: 0.0,
            fault_detection_seconds: None,
            error: None,
            outputs: Vec::new(),
        };
        if blocked {
            reports.push(report);
            continue;
        }
        let p = stage.policy;
        for attempt in 1..=p.retry_limit + 1 {
            report.attempts = attempt;
            let mut probe_rng = rng::stream(dag.seed, ((index as u64) << 32) | attempt as u64);
            let ctx = StageContext { name: &stage.name, attempt, workdir: &dag.workdir, inputs: &inputs };
            let fault = match (stage.task)(&ctx) {
                TaskOutcome::Success { outputs, virtual_seconds } if virtual_seconds <= p.timeout_seconds => {
                    report.virtual_seconds += virtual_seconds;
                    report.status = StageStatus::Success;
                    report.error = None;
                    report.outputs = outputs
                        .iter()
                        .map(|o| o.strip_prefix(&dag.workdir).unwrap_or(o).display().to_string())
                        .collect();
                    inputs = outputs;
                    None
                }
                TaskOutcome::Success { .. } => Some(("timed out".to_string(), p.timeout_seconds, p.timeout_seconds)),
                TaskOutcome::Failure { error, after_seconds } => {
                    let onset = after_seconds.clamp(0.0, p.timeout_seconds);
                    Some((error, onset, detect(&p, onset, &mut probe_rng).min(p.timeout_seconds)))
                }
                TaskOutcome::Hang { after_seconds } => {
                    let onset = after_seconds.clamp(0.0, p.timeout_seconds);
                    Some(("stopped responding".to_string(), onset, detect(&p, onset, &mut probe_rng).min(p.timeout_seconds)))
                }
            };
            match fault {
                None => break,
                Some((error, onset, detected)) => {
                    report.virtual_seconds += detected;
                    report.fault_detection_seconds = Some(detected - onset);
                    report.error = Some(error);
                    report.status = StageStatus::Failed;
                }
            }
        }
        blocked = report.status != StageStatus::Success;
        reports.push(report);
    }
    Ok(PipelineReport { stages: reports })
}
