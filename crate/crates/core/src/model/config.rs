use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Per-example clipping and Gaussian noise applied to every minibatch gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpSgdSettings {
    pub clip_norm: f64,
    pub noise_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lstm_layers: usize,
    pub hidden_size: usize,
    pub mlp_hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Stop after this many epochs without a validation AUC improvement.
    pub patience: Option<usize>,
    pub validation_fraction: f64,
    pub dp: Option<DpSgdSettings>,
}

impl Default for TrainConfig {
    /// The tuned preset: lr 0.00137, batch 128, 3 LSTM layers, dropout 0.32.
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.00137,
            batch_size: 128,
            epochs: 20,
            lstm_layers: 3,
            hidden_size: 32,
            mlp_hidden: vec![16],
            dropout_rate: 0.32,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            patience: None,
            validation_fraction: 0.2,
            dp: None,
        }
    }
}

impl TrainConfig {
    /// Starting point before tuning: lr 0.01, batch 32, 2 LSTM layers, dropout 0.5.
    pub fn untuned() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 32,
            lstm_layers: 2,
            dropout_rate: 0.5,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(invalid(format!("dropout_rate {} outside [0, 1)", self.dropout_rate)));
        }
        if self.lstm_layers > 0 && self.hidden_size == 0 {
            return Err(invalid("hidden_size must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(invalid("validation_fraction outside [0, 1)"));
        }
        if let Some(dp) = &self.dp {
            if !(dp.clip_norm > 0.0) || !(dp.noise_multiplier >= 0.0) {
                return Err(invalid("dp clip_norm must be positive and noise_multiplier nonnegative"));
            }
        }
        Ok(())
    }
}
