use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{OptimizerKind, TrainConfig};
use super::fusion::{FusionModel, Mode};
use super::metrics::{binary_metrics, EvalMetrics};
use super::sample::{has_both_classes, labels, Sample};
use crate::error::{Error, Result};
use crate::privacy::{dpsgd_sanitize, DpParams};
use crate::rng::{self, Rng};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: u64 },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
                t: 0,
            },
        }
    }

    /// Applies one update to the flat parameter vector.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t as i32);
                let c2 = 1.0 - ADAM_BETA2.powi(*t as i32);
                for i in 0..params.len() {
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
                    params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FusionModel,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Seeded shuffle split; returns (train, validation).
pub fn split_validation(data: &[Sample], fraction: f64, seed: u64) -> (Vec<Sample>, Vec<Sample>) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut rng::stream(seed, 2));
    let n_val = (data.len() as f64 * fraction).round() as usize;
    let val = idx[..n_val].iter().map(|&i| data[i].clone()).collect();
    let train = idx[n_val..].iter().map(|&i| data[i].clone()).collect();
    (train, val)
}

/// Epoch-at-a-time trainer; owns its optimizer and shuffling state.
pub struct Trainer {
    pub model: FusionModel,
    optimizer: Optimizer,
    rng: Rng,
    train: Arc<[Sample]>,
    val: Arc<[Sample]>,
    epoch: usize,
}

impl Trainer {
    pub fn new(model: FusionModel, train: Arc<[Sample]>, val: Arc<[Sample]>) -> Result<Self> {
        model.config.validate()?;
        if train.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !has_both_classes(&train) {
            return Err(Error::SingleClass);
        }
        if let Some(bad) = train.iter().chain(val.iter()).find(|s| s.statics.len() != model.static_dim) {
            return Err(Error::Shape(format!(
                "sample has {} static features, model expects {}",
                bad.statics.len(),
                model.static_dim
            )));
        }
        let optimizer = Optimizer::new(model.config.optimizer, model.param_count());
        let rng = rng::stream(model.config.seed, 1);
        Ok(Trainer {
            model,
            optimizer,
            rng,
            train,
            val,
            epoch: 0,
        })
    }

    pub fn epochs_run(&self) -> usize {
        self.epoch
    }

    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let cfg = self.model.config.clone();
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.rng);

        let mut total_loss = 0.0;
        let mut flat = self.model.params.flatten();
        for batch in order.chunks(cfg.batch_size) {
            let grad = match cfg.dp {
                None => {
                    let mut acc = self.model.params.zeros_like();
                    for &i in batch {
                        let s = &self.train[i];
                        let tr = self.model.forward(&s.statics, &s.series, Mode::Train(&mut self.rng))?;
                        total_loss += self.model.backward_into(&tr, s.label as f64, &mut acc).0;
                    }
                    acc.scale(1.0 / batch.len() as f64);
                    acc.flatten()
                }
                Some(dp) => {
                    let mut per_example = Vec::with_capacity(batch.len());
                    for &i in batch {
                        let s = &self.train[i];
                        let tr = self.model.forward(&s.statics, &s.series, Mode::Train(&mut self.rng))?;
                        let (g, loss, _) = self.model.backward(&tr, s.label as f64);
                        total_loss += loss;
                        per_example.push(g.flatten());
                    }
                    let params = DpParams {
                        clip_norm: dp.clip_norm,
                        noise_multiplier: dp.noise_multiplier,
                        lot_size: batch.len(),
                        ..DpParams::default()
                    };
                    dpsgd_sanitize(&per_example, &params, &mut self.rng)?
                }
            };
            self.optimizer.step(&mut flat, &grad, cfg.learning_rate);
            self.model.params.assign_flat(&flat);
        }
        if total_loss.is_nan() {
            return Err(Error::NonFinite("training loss".into()));
        }

        self.epoch += 1;
        let val_auc = if has_both_classes(&self.val) {
            Some(evaluate(&self.model, &self.val)?.auc)
        } else {
            None
        };
        Ok(EpochRecord {
            epoch: self.epoch,
            train_loss: total_loss / self.train.len() as f64,
            val_auc,
        })
    }
}

/// Trains on explicit train/validation sets for `config.epochs` epochs.
/// With `patience`, stops early and restores the best-validation weights.
pub fn train_split(train: Vec<Sample>, val: Vec<Sample>, config: &TrainConfig) -> Result<TrainOutcome> {
    let static_dim = train.first().map_or(0, |s| s.statics.len());
    let model = FusionModel::new(config, static_dim)?;
    let mut trainer = Trainer::new(model, train.into(), val.into())?;
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, FusionModel)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    for _ in 0..config.epochs {
        let rec = trainer.run_epoch()?;
        history.push(rec);
        if let (Some(patience), Some(auc)) = (config.patience, rec.val_auc) {
            if best.as_ref().is_none_or(|(b, _)| auc > *b) {
                best = Some((auc, trainer.model.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }
    let model = match (config.patience, best) {
        (Some(_), Some((_, m))) => m,
        _ => trainer.model,
    };
    Ok(TrainOutcome {
        model,
        history,
        stopped_early,
    })
}

/// Trains with a seeded train/validation split of `data`.
pub fn train(data: &[Sample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (tr, val) = split_validation(data, config.validation_fraction, config.seed);
    train_split(tr, val, config)
}

pub fn predict_all(model: &FusionModel, data: &[Sample]) -> Result<Vec<f64>> {
    data.iter().map(|s| model.predict(&s.statics, &s.series)).collect()
}

pub fn evaluate(model: &FusionModel, data: &[Sample]) -> Result<EvalMetrics> {
    let scores = predict_all(model, data)?;
    Ok(binary_metrics(&scores, &labels(data)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    /// Linearly separable on the first static feature; series is noise.
    pub(crate) fn separable(n: usize, seed: u64) -> Vec<Sample> {
        let mut r = rng::seeded(seed);
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let sign = if label == 1 { 1.0 } else { -1.0 };
                Sample {
                    statics: vec![sign * r.gen_range(0.5..2.0), r.gen_range(-1.0..1.0)],
                    series: (0..4).map(|_| r.gen_range(-1.0..1.0)).collect(),
                    label,
                }
            })
            .collect()
    }

    fn toy_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: 0.02,
            batch_size: 16,
            epochs,
            lstm_layers: 1,
            hidden_size: 4,
            mlp_hidden: vec![4],
            dropout_rate: 0.0,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn loss_on_separable_set_drops_below_tenth() {
        let out = train(&separable(200, 1), &toy_config(60)).unwrap();
        let last = out.history.last().unwrap();
        assert!(last.train_loss < 0.1, "final loss {}", last.train_loss);
        assert_eq!(out.history.len(), 60);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = separable(50, 2);
        let cfg = toy_config(0);
        let out = train(&data, &cfg).unwrap();
        assert_eq!(out.model, FusionModel::new(&cfg, 2).unwrap());
        assert!(out.history.is_empty());
    }

    #[test]
    fn same_seed_gives_identical_weights() {
        let data = separable(80, 3);
        let cfg = TrainConfig { dropout_rate: 0.3, ..toy_config(3) };
        let a = train(&data, &cfg).unwrap().model;
        let b = train(&data, &cfg).unwrap().model;
        assert_eq!(a.params.flatten(), b.params.flatten());
    }

    #[test]
    fn rejects_empty_and_single_class() {
        assert!(matches!(train(&[], &toy_config(1)), Err(Error::EmptyInput)));
        let mut data = separable(20, 4);
        data.iter_mut().for_each(|s| s.label = 1);
        assert!(matches!(train(&data, &toy_config(1)), Err(Error::SingleClass)));
    }

    #[test]
    fn early_stopping_truncates_history() {
        let data = separable(120, 6);
        let cfg = TrainConfig { patience: Some(2), ..toy_config(200) };
        let out = train(&data, &cfg).unwrap();
        assert!(out.stopped_early);
        assert!(out.history.len() < 200);
    }

    #[test]
    fn dp_training_runs_and_stays_finite() {
        let data = separable(60, 8);
        let cfg = TrainConfig {
            dp: Some(crate::model::DpSgdSettings { clip_norm: 1.0, noise_multiplier: 0.1 }),
            ..toy_config(3)
        };
        let out = train(&data, &cfg).unwrap();
        assert!(out.model.params.flatten().iter().all(|v| v.is_finite()));
    }
}
