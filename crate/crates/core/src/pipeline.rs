//! The five-stage training pipeline wired onto the orchestrator. Stages
//! pass files through a working directory.
//!
//! Virtual stage durations follow a nominal per-row cost model so the
//! timing table is independent of the host machine.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::data::{from_records, generate_cohort_with_oracle, parse_table, to_records, write_table, RecordSet, Schema};
use crate::error::{Error, Result};
use crate::model::{auc, evaluate, load_model, predict_all, save_model, train, EvalMetrics};
use crate::preprocess::{samples_from_records, train_test_split, CleaningState, FeatureState, PreprocessState};
use crate::serve::{run_pipeline, PipelineDag, PipelineReport, StageContext, TaskOutcome, STAGE_NAMES};

pub const RAW_FILE: &str = "raw.csv";
pub const ORACLE_FILE: &str = "oracle.csv";
pub const TRAIN_CLEAN_FILE: &str = "train_clean.csv";
pub const TEST_CLEAN_FILE: &str = "test_clean.csv";
pub const CLEANING_FILE: &str = "cleaning.json";
pub const TRAIN_FEATURES_FILE: &str = "train_features.csv";
pub const TEST_FEATURES_FILE: &str = "test_features.csv";
pub const PREPROCESS_FILE: &str = "preprocess.ckpt";
pub const MODEL_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "training_history.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const REPORT_FILE: &str = "pipeline_report.json";

const ACQUISITION_SECONDS_PER_ROW: f64 = 1.2;
const PREPROCESS_SECONDS_PER_ROW: f64 = 0.9;
const FEATURE_SECONDS_PER_ROW_TREE: f64 = 0.012;
const TRAIN_SECONDS_PER_SAMPLE_EPOCH: f64 = 0.04;
const EVAL_SECONDS_PER_ROW: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub test: EvalMetrics,
    /// AUC of the generator's posterior on the same test rows.
    pub oracle_bayes_auc: f64,
    pub auc_gap: f64,
    pub n_test: usize,
}

fn read_records(path: &Path) -> Result<RecordSet> {
    to_records(&parse_table(&std::fs::read_to_string(path)?)?, &Schema::any_statics())
}

fn write_records(path: &Path, set: &RecordSet) -> Result<()> {
    std::fs::write(path, write_table(&from_records(set))?)?;
    Ok(())
}

fn outcome(result: Result<(Vec<PathBuf>, f64)>) -> TaskOutcome {
    match result {
        Ok((outputs, virtual_seconds)) => TaskOutcome::Success { outputs, virtual_seconds },
        Err(e) => TaskOutcome::Failure { error: e.to_string(), after_seconds: 0.0 },
    }
}

fn acquire(cfg: &PipelineConfig, dir: &Path) -> Result<(Vec<PathBuf>, f64)> {
    let spec = crate::data::CohortSpec { seed: cfg.seed, ..cfg.cohort.clone() };
    let (table, oracle) = generate_cohort_with_oracle(&spec)?;
    let raw = dir.join(RAW_FILE);
    std::fs::write(&raw, write_table(&table)?)?;
    let mut w = csv::Writer::from_path(dir.join(ORACLE_FILE))?;
    w.write_record(["patient_id", "oracle_logit"])?;
    for (row, logit) in table.rows.iter().zip(&oracle) {
        w.write_record([row[0].as_text().unwrap_or_default(), format!("{logit:?}")])?;
    }
    w.flush()?;
    Ok((vec![raw, dir.join(ORACLE_FILE)], spec.n as f64 * ACQUISITION_SECONDS_PER_ROW))
}

fn preprocess(cfg: &PipelineConfig, dir: &Path) -> Result<(Vec<PathBuf>, f64)> {
    let table = parse_table(&std::fs::read_to_string(dir.join(RAW_FILE))?)?;
    let records = to_records(&table, &Schema::default())?;
    let (train_idx, test_idx) = train_test_split(records.len(), cfg.test_fraction, cfg.seed);
    let (train, test) = (records.subset(&train_idx), records.subset(&test_idx));
    let cleaning = CleaningState::fit(&train)?;
    let outputs = vec![dir.join(TRAIN_CLEAN_FILE), dir.join(TEST_CLEAN_FILE), dir.join(CLEANING_FILE)];
    write_records(&outputs[0], &cleaning.transform(&train)?)?;
    write_records(&outputs[1], &cleaning.transform(&test)?)?;
    std::fs::write(&outputs[2], serde_json::to_string_pretty(&cleaning)?)?;
    Ok((outputs, records.len() as f64 * PREPROCESS_SECONDS_PER_ROW))
}

fn engineer(cfg: &PipelineConfig, dir: &Path) -> Result<(Vec<PathBuf>, f64)> {
    let train = read_records(&dir.join(TRAIN_CLEAN_FILE))?;
    let test = read_records(&dir.join(TEST_CLEAN_FILE))?;
    let cleaning: CleaningState = serde_json::from_str(&std::fs::read_to_string(dir.join(CLEANING_FILE))?)?;
    let features = FeatureState::fit(&train, &cfg.preprocessing)?;
    let outputs = vec![dir.join(TRAIN_FEATURES_FILE), dir.join(TEST_FEATURES_FILE), dir.join(PREPROCESS_FILE)];
    write_records(&outputs[0], &features.transform(&train)?)?;
    write_records(&outputs[1], &features.transform(&test)?)?;
    PreprocessState { cleaning, features }.to_checkpoint()?.write(&outputs[2])?;
    let cost = (train.len() + test.len()) as f64 * cfg.preprocessing.forest.n_trees as f64 * FEATURE_SECONDS_PER_ROW_TREE;
    Ok((outputs, cost))
}

fn fit_model(cfg: &PipelineConfig, dir: &Path) -> Result<(Vec<PathBuf>, f64)> {
    let samples = samples_from_records(&read_records(&dir.join(TRAIN_FEATURES_FILE))?)?;
    let out = train(&samples, &cfg.train_config())?;
    let model_path = dir.join(MODEL_FILE);
    save_model(&out.model, &model_path)?;
    let mut history = String::new();
    for rec in &out.history {
        history.push_str(&serde_json::to_string(rec)?);
        history.push('\n');
    }
    std::fs::write(dir.join(HISTORY_FILE), history)?;
    let cost = samples.len() as f64 * out.history.len() as f64 * TRAIN_SECONDS_PER_SAMPLE_EPOCH;
    Ok((vec![model_path, dir.join(HISTORY_FILE)], cost))
}

fn evaluate_model(dir: &Path) -> Result<(Vec<PathBuf>, f64)> {
    let test = read_records(&dir.join(TEST_FEATURES_FILE))?;
    let samples = samples_from_records(&test)?;
    let model = load_model(&dir.join(MODEL_FILE))?;
    let metrics = evaluate(&model, &samples)?;

    let mut oracle: HashMap<String, f64> = HashMap::new();
    let mut r = csv::Reader::from_path(dir.join(ORACLE_FILE))?;
    for rec in r.records() {
        let rec = rec?;
        let logit: f64 = rec[1].parse().map_err(|_| Error::Format("bad oracle logit".into()))?;
        oracle.insert(rec[0].to_string(), logit);
    }
    let oracle_scores: Vec<f64> = test
        .records
        .iter()
        .map(|r| oracle.get(&r.patient_id).copied().ok_or_else(|| Error::Format(format!("no oracle row for {}", r.patient_id))))
        .collect::<Result<_>>()?;
    let labels: Vec<bool> = samples.iter().map(|s| s.label == 1).collect();
    let oracle_bayes_auc = auc(&oracle_scores, &labels);
    debug_assert_eq!(predict_all(&model, &samples)?.len(), samples.len());
    let summary = EvaluationSummary {
        auc_gap: oracle_bayes_auc - metrics.auc,
        test: metrics,
        oracle_bayes_auc,
        n_test: samples.len(),
    };
    let path = dir.join(METRICS_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
    Ok((vec![path], samples.len() as f64 * EVAL_SECONDS_PER_ROW))
}

type StageFn<'a> = Box<dyn Fn(&Path) -> Result<(Vec<PathBuf>, f64)> + 'a>;

/// Builds the five stages for `cfg` writing into `dir`.
pub fn build_pipeline<'a>(cfg: &'a PipelineConfig, dir: &Path) -> PipelineDag<'a> {
    let mut dag = PipelineDag::new(dir, cfg.seed);
    let p = cfg.orchestration;
    let tasks: [StageFn<'a>; 5] = [
        Box::new(move |dir| acquire(cfg, dir)),
        Box::new(move |dir| preprocess(cfg, dir)),
        Box::new(move |dir| engineer(cfg, dir)),
        Box::new(move |dir| fit_model(cfg, dir)),
        Box::new(evaluate_model),
    ];
    for (name, task) in STAGE_NAMES.iter().zip(tasks) {
        dag.add_stage(name, p, move |ctx: &StageContext| outcome(task(ctx.workdir)));
    }
    dag
}

/// Runs every stage and writes the stage report next to the outputs.
pub fn run_full_pipeline(cfg: &PipelineConfig, dir: &Path) -> Result<PipelineReport> {
    std::fs::create_dir_all(dir)?;
    let mut dag = build_pipeline(cfg, dir);
    let report = run_pipeline(&mut dag)?;
    std::fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

pub fn read_evaluation(dir: &Path) -> Result<EvaluationSummary> {
    Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(METRICS_FILE))?)?)
}
