//! Command-line front end. Structured results go to files; human-readable
//! tables go to standard output.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::PipelineConfig;
use crate::data::{generate_cohort_with_oracle, parse_table, to_records, write_table, CohortSpec, RecordSet, Schema};
use crate::distributed::{federated_round, AggregationMode, EncryptionContext, FederatedRoundConfig};
use crate::error::{Error, Result};
use crate::explain::{
    explain_sample, export_heatmap, fgsm_robustness, model_importance, player_names, select_background, ShapleyMode,
    BACKGROUND_SIZE,
};
use crate::hyperopt::{hyperparameter_table, tune, ModelObjective, Proposer, SchedulerConfig, TuneConfig};
use crate::model::{evaluate, load_model, save_model, split_validation, train, FusionModel, Sample, TrainConfig};
use crate::pipeline::{read_evaluation, run_full_pipeline, REPORT_FILE};
use crate::preprocess::{samples_from_records, train_test_split, PreprocessState};
use crate::privacy::{keypair_from_checkpoint, keypair_to_checkpoint, FixedPointCodec, PaillierKeypair};
use crate::serve::simulate_service;
use crate::checkpoint::Checkpoint;

#[derive(Parser, Debug)]
#[command(name = "glycopipe", version, about = "Diabetes-risk prediction pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProposerArg {
    Random,
    Smbo,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExplainMode {
    Exact,
    Sample,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FedMode {
    Plain,
    Encrypted,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort as CSV.
    Generate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the generator's posterior logit per patient.
        #[arg(long)]
        oracle: Option<PathBuf>,
    },
    /// Split, clean and engineer features; writes train/test feature CSVs and the fitted state.
    Preprocess {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the fusion model on a feature CSV.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a model checkpoint on a feature CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hyperparameter search with successive halving.
    Tune {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100)]
        budget: usize,
        #[arg(long, default_value_t = 3)]
        eta: usize,
        #[arg(long, default_value_t = 1)]
        grace: usize,
        #[arg(long = "max-t", default_value_t = 27)]
        max_t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ProposerArg::Smbo)]
        proposer: ProposerArg,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "tune_out")]
        out: PathBuf,
    },
    /// Federated training across simulated clients.
    Fedtrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 3)]
        clients: usize,
        #[arg(long, default_value_t = 5)]
        rounds: usize,
        #[arg(long, value_enum, default_value_t = FedMode::Plain)]
        mode: FedMode,
        /// Paillier key checkpoint; required for encrypted mode.
        #[arg(long)]
        key: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a Paillier key pair.
    Keygen {
        #[arg(long, default_value_t = crate::privacy::DEFAULT_KEY_BITS)]
        bits: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Shapley attributions, attention heatmap and robustness report.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = ExplainMode::Exact)]
        mode: ExplainMode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        rows: usize,
        #[arg(long, default_value_t = 200)]
        permutations: usize,
        #[arg(long = "epsilon-adv", default_value_t = 0.1)]
        epsilon_adv: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Discrete-event simulation of the serving tier.
    ServeSim {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Optional model and feature CSV; key `k` maps to row `(k − 1) mod n`.
        #[arg(long, requires = "data")]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run all five pipeline stages.
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "pipeline_out")]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    path.map_or_else(|| Ok(PipelineConfig::default()), PipelineConfig::load)
}

fn read_records(path: &Path) -> Result<RecordSet> {
    to_records(&parse_table(&std::fs::read_to_string(path)?)?, &Schema::any_statics())
}

fn read_samples(path: &Path) -> Result<(RecordSet, Vec<Sample>)> {
    let set = read_records(path)?;
    let samples = samples_from_records(&set)?;
    Ok((set, samples))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Generate { n, seed, config, out, oracle } => {
            let cfg = load_config(config.as_deref())?;
            let spec = CohortSpec {
                n: n.unwrap_or(cfg.cohort.n),
                seed: seed.unwrap_or(cfg.seed),
                ..cfg.cohort
            };
            let (table, logits) = generate_cohort_with_oracle(&spec)?;
            std::fs::write(&out, write_table(&table)?)?;
            if let Some(path) = oracle {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["patient_id", "oracle_logit"])?;
                for (row, l) in table.rows.iter().zip(&logits) {
                    w.write_record([row[0].as_text().unwrap_or_default(), format!("{l:?}")])?;
                }
                w.flush()?;
            }
            println!("wrote {} rows to {}", spec.n, out.display());
        }
        Command::Preprocess { data, out, seed, config } => {
            let cfg = load_config(config.as_deref())?;
            let seed = seed.unwrap_or(cfg.seed);
            let records = to_records(&parse_table(&std::fs::read_to_string(&data)?)?, &Schema::default())?;
            let (tr, te) = train_test_split(records.len(), cfg.test_fraction, seed);
            let (train_set, test_set) = (records.subset(&tr), records.subset(&te));
            let pre = cfg.preprocessing.clone();
            let state = PreprocessState::fit(&train_set, &crate::preprocess::PreprocessConfig {
                forest: crate::preprocess::RfParams { seed, ..pre.forest },
                ..pre
            })?;
            create_dir(&out)?;
            for (name, set) in [("train_features.csv", &train_set), ("test_features.csv", &test_set)] {
                let t = crate::data::from_records(&state.transform(set)?);
                std::fs::write(out.join(name), write_table(&t)?)?;
            }
            state.to_checkpoint()?.write(&out.join("preprocess.ckpt"))?;
            println!("{:<6}{:<24}{:>12}", "Rank", "Feature", "Importance");
            for (i, f) in state.features.ranking.features.iter().enumerate() {
                println!("{:<6}{:<24}{:>12.4}", i + 1, f.name, f.score);
            }
        }
        Command::Train { data, out, seed, epochs, config } => {
            let cfg = load_config(config.as_deref())?;
            let mut tc = cfg.train_config();
            if let Some(s) = seed {
                tc.seed = s;
            }
            if let Some(e) = epochs {
                tc.epochs = e;
            }
            let (_, samples) = read_samples(&data)?;
            let outcome = train(&samples, &tc)?;
            save_model(&outcome.model, &out)?;
            println!("{:>6}{:>14}{:>10}", "Epoch", "Train loss", "Val AUC");
            for r in &outcome.history {
                let auc = r.val_auc.map_or("-".to_string(), |a| format!("{a:.4}"));
                println!("{:>6}{:>14.5}{:>10}", r.epoch, r.train_loss, auc);
            }
        }
        Command::Evaluate { model, data, out } => {
            let m = load_model(&model)?;
            let (_, samples) = read_samples(&data)?;
            let metrics = evaluate(&m, &samples)?;
            if let Some(path) = out {
                write_json(&path, &metrics)?;
            }
            println!("{:<14}{:>10}", "Metric", "Value");
            for (k, v) in [
                ("Accuracy", metrics.accuracy),
                ("Sensitivity", metrics.sensitivity),
                ("Specificity", metrics.specificity),
                ("AUC", metrics.auc),
            ] {
                println!("{k:<14}{v:>10.4}");
            }
        }
        Command::Tune { data, budget, eta, grace, max_t, seed, proposer, parallelism, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let (_, samples) = read_samples(&data)?;
            let base = TrainConfig { seed, ..cfg.train_config() };
            let (tr, val) = split_validation(&samples, base.validation_fraction, seed);
            let objective = ModelObjective { train: Arc::from(tr), val: Arc::from(val), base: base.clone() };
            let scheduler = SchedulerConfig {
                max_t,
                grace_period: grace,
                reduction_factor: eta,
                ..cfg.tuning.scheduler.clone()
            };
            let tc = TuneConfig {
                budget,
                parallelism,
                seed,
                proposer: match proposer {
                    ProposerArg::Random => Proposer::Random,
                    ProposerArg::Smbo => Proposer::Smbo,
                },
            };
            let result = tune(&objective, &cfg.tuning.space, &scheduler, &tc)?;
            create_dir(&out)?;
            let mut f = std::fs::File::create(out.join("trials.jsonl"))?;
            result.write_jsonl(&mut f)?;
            write_json(&out.join("best.json"), result.best_trial())?;
            print!("{}", hyperparameter_table(&base, &result.best_trial().config));
            println!("trials: {}, total epochs: {}", result.trials.len(), result.total_epochs());
        }
        Command::Fedtrain { data, clients, rounds, mode, key, seed, config, out } => {
            let cfg = load_config(config.as_deref())?;
            if clients == 0 {
                return Err(Error::InvalidArgument("need at least one client".into()));
            }
            let (_, samples) = read_samples(&data)?;
            let mut shards: Vec<Vec<Sample>> = vec![Vec::new(); clients];
            for (i, s) in samples.into_iter().enumerate() {
                shards[i % clients].push(s);
            }
            let tc = TrainConfig { seed, ..cfg.train_config() };
            let static_dim = shards[0].first().map_or(0, |s| s.statics.len());
            let mut model = FusionModel::new(&tc, static_dim)?;
            let keypair = match (mode, key) {
                (FedMode::Encrypted, Some(path)) => Some(keypair_from_checkpoint(&Checkpoint::read(&path)?)?),
                (FedMode::Encrypted, None) => {
                    return Err(Error::InvalidArgument("encrypted mode needs --key".into()));
                }
                _ => None,
            };
            let codec = keypair.as_ref().map(|k| FixedPointCodec::for_key(&k.public)).transpose()?;
            let crypto = keypair.as_ref().zip(codec.as_ref()).map(|(keypair, codec)| EncryptionContext { keypair, codec });
            let agg = if crypto.is_some() { AggregationMode::Encrypted } else { AggregationMode::Plain };
            println!("{:>6}{:>14}{:>14}", "Round", "Encryptions", "Decryptions");
            for round in 0..rounds {
                let rc = FederatedRoundConfig { local_epochs: 1, mode: agg, seed: seed.wrapping_add(round as u64) };
                let report = federated_round(&shards, &model, &rc, crypto.as_ref())?;
                model = report.model;
                println!("{:>6}{:>14}{:>14}", round + 1, report.stats.encryptions, report.stats.decryptions);
            }
            save_model(&model, &out)?;
        }
        Command::Keygen { bits, seed, out } => {
            let kp = PaillierKeypair::generate_seeded(bits, seed)?;
            keypair_to_checkpoint(&kp).write(&out)?;
            println!("wrote {}-bit key to {}", kp.public.key_bits, out.display());
        }
        Command::Explain { model, data, mode, out, rows, permutations, epsilon_adv, seed } => {
            let m = load_model(&model)?;
            let (set, samples) = read_samples(&data)?;
            if samples.is_empty() {
                return Err(Error::EmptyInput);
            }
            let background = select_background(&samples, BACKGROUND_SIZE, seed);
            let mode = match mode {
                ExplainMode::Exact => ShapleyMode::Exact,
                ExplainMode::Sample => ShapleyMode::Sample { permutations },
            };
            let rows = rows.min(samples.len()).max(1);
            create_dir(&out)?;
            let names = player_names(&set.static_names, set.series_len > 0);
            let mut w = csv::Writer::from_path(out.join("attributions.csv"))?;
            let mut header = vec!["patient_id".to_string(), "base_value".into(), "prediction".into()];
            header.extend(names.iter().cloned());
            w.write_record(&header)?;
            for (r, s) in set.records.iter().zip(&samples).take(rows) {
                let a = explain_sample(&m, s, &background, mode, seed)?;
                let mut rec = vec![r.patient_id.clone(), a.base_value.to_string(), a.prediction.to_string()];
                rec.extend(a.values.iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
            w.flush()?;
            let ranking = model_importance(&m, &samples[..rows], &background, &set.static_names, mode, seed)?;
            ranking.write_csv(std::fs::File::create(out.join("ranking.csv"))?)?;
            let recs: Vec<(String, &Sample)> =
                set.records.iter().zip(&samples).take(rows).map(|(r, s)| (r.patient_id.clone(), s)).collect();
            export_heatmap(&m, &recs)?.write_csv(std::fs::File::create(out.join("heatmap.csv"))?)?;
            let robust = fgsm_robustness(&m, &samples, epsilon_adv)?;
            write_json(&out.join("robustness.json"), &robust)?;
            println!("{:<6}{:<24}{:>14}", "Rank", "Feature", "Mean |phi|");
            for (i, f) in ranking.features.iter().enumerate() {
                println!("{:<6}{:<24}{:>14.5}", i + 1, f.name, f.mean_abs);
            }
            println!(
                "robustness at eps {}: {:.1}% of {} predictions unchanged",
                robust.epsilon,
                robust.unchanged_fraction * 100.0,
                robust.samples
            );
        }
        Command::ServeSim { config, seed, model, data, out } => {
            let cfg = load_config(config.as_deref())?;
            let seed = seed.unwrap_or(cfg.seed);
            let loaded = match (model, data) {
                (Some(m), Some(d)) => Some((load_model(&m)?, read_samples(&d)?.1)),
                _ => None,
            };
            let mut predict = |key: u64| match &loaded {
                Some((m, rows)) if !rows.is_empty() => {
                    let s = &rows[(key.saturating_sub(1) as usize) % rows.len()];
                    m.predict(&s.statics, &s.series).unwrap_or(f64::NAN)
                }
                _ => 0.0,
            };
            let report = simulate_service(&mut predict, &cfg.workload, &cfg.cache, &cfg.scaling, seed)?;
            create_dir(&out)?;
            write_json(&out.join("sim_metrics.json"), &report.metrics)?;
            report.write_log_jsonl(std::fs::File::create(out.join("metrics_log.jsonl"))?)?;
            print!("{}", report.serving_table(&cfg.scaling));
        }
        Command::Pipeline { config, seed, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_full_pipeline(&cfg, &out)?;
            print!("{}", report.stage_table());
            if !report.succeeded() {
                for s in report.stages.iter().filter(|s| s.error.is_some()) {
                    eprintln!("{}: {}", s.name, s.error.as_deref().unwrap_or_default());
                }
                eprintln!("see {}", out.join(REPORT_FILE).display());
                return Ok(1);
            }
            let eval = read_evaluation(&out)?;
            println!(
                "test AUC {:.4}, oracle Bayes AUC {:.4}, accuracy {:.4}",
                eval.test.auc, eval.oracle_bayes_auc, eval.test.accuracy
            );
        }
    }
    Ok(0)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
