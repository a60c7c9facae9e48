use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::TrainConfig;

/// Sampled hyperparameters by name; integer and choice values are stored
/// as whole or listed reals.
pub type Config = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamSpec {
    LogUniform { name: String, lo: f64, hi: f64 },
    Uniform { name: String, lo: f64, hi: f64 },
    IntUniform { name: String, lo: i64, hi: i64 },
    Choice { name: String, values: Vec<f64> },
}

impl ParamSpec {
    pub fn name(&self) -> &str {
        match self {
            ParamSpec::LogUniform { name, .. }
            | ParamSpec::Uniform { name, .. }
            | ParamSpec::IntUniform { name, .. }
            | ParamSpec::Choice { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            ParamSpec::Choice { values, .. } => values.len(),
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            ParamSpec::LogUniform { lo, hi, .. } => *lo > 0.0 && lo < hi && hi.is_finite(),
            ParamSpec::Uniform { lo, hi, .. } => lo < hi && lo.is_finite() && hi.is_finite(),
            ParamSpec::IntUniform { lo, hi, .. } => lo < hi,
            ParamSpec::Choice { values, .. } => !values.is_empty() && values.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("bad bounds for parameter `{}`", self.name())))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub params: Vec<ParamSpec>,
}

impl Default for SearchSpace {
    /// Learning rate, batch size, LSTM depth and dropout around the tuned preset.
    fn default() -> Self {
        SearchSpace {
            params: vec![
                ParamSpec::LogUniform { name: "learning_rate".into(), lo: 1e-5, hi: 1e-1 },
                ParamSpec::Choice { name: "batch_size".into(), values: vec![32.0, 64.0, 128.0, 256.0] },
                ParamSpec::IntUniform { name: "lstm_layers".into(), lo: 1, hi: 4 },
                ParamSpec::Uniform { name: "dropout_rate".into(), lo: 0.1, hi: 0.7 },
            ],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(invalid("search space is empty"));
        }
        self.params.iter().try_for_each(ParamSpec::validate)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Config {
        self.params
            .iter()
            .map(|p| {
                let v = match p {
                    ParamSpec::LogUniform { lo, hi, .. } => rng.gen_range(lo.ln()..hi.ln()).exp().clamp(*lo, *hi),
                    ParamSpec::Uniform { lo, hi, .. } => rng.gen_range(*lo..*hi),
                    ParamSpec::IntUniform { lo, hi, .. } => rng.gen_range(*lo..=*hi) as f64,
                    ParamSpec::Choice { values, .. } => values[rng.gen_range(0..values.len())],
                };
                (p.name().to_string(), v)
            })
            .collect()
    }

    /// Dimension of the encoded unit cube.
    pub fn dims(&self) -> usize {
        self.params.iter().map(ParamSpec::width).sum()
    }

    /// Maps a config into `[0, 1]^dims`: log scale for log-uniform,
    /// linear for uniform and integer, one-hot for choices.
    pub fn encode(&self, config: &Config) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dims());
        for p in &self.params {
            let v = config.get(p.name()).copied().unwrap_or(f64::NAN);
            match p {
                ParamSpec::LogUniform { lo, hi, .. } => out.push((v.ln() - lo.ln()) / (hi.ln() - lo.ln())),
                ParamSpec::Uniform { lo, hi, .. } => out.push((v - lo) / (hi - lo)),
                ParamSpec::IntUniform { lo, hi, .. } => out.push((v - *lo as f64) / (*hi - *lo) as f64),
                ParamSpec::Choice { values, .. } => out.extend(values.iter().map(|c| f64::from(*c == v))),
            }
        }
        out
    }

    /// Inverse of [`encode`](Self::encode) on the cube; clips to bounds,
    /// rounds integers and picks the largest one-hot entry (first on ties).
    pub fn decode(&self, x: &[f64]) -> Config {
        let mut k = 0;
        let mut config = Config::new();
        for p in &self.params {
            let u = x.get(k).copied().unwrap_or(0.0).clamp(0.0, 1.0);
            let v = match p {
                ParamSpec::LogUniform { lo, hi, .. } => (lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(*lo, *hi),
                ParamSpec::Uniform { lo, hi, .. } => lo + u * (hi - lo),
                ParamSpec::IntUniform { lo, hi, .. } => (*lo as f64 + u * (*hi - *lo) as f64).round(),
                ParamSpec::Choice { values, .. } => {
                    let slot = &x[k..k + values.len()];
                    let mut best = 0;
                    for (i, s) in slot.iter().enumerate() {
                        if *s > slot[best] {
                            best = i;
                        }
                    }
                    values[best]
                }
            };
            k += p.width();
            config.insert(p.name().to_string(), v);
        }
        config
    }

    pub fn contains(&self, config: &Config) -> bool {
        self.params.iter().all(|p| match (p, config.get(p.name())) {
            (ParamSpec::LogUniform { lo, hi, .. } | ParamSpec::Uniform { lo, hi, .. }, Some(v)) => lo <= v && v <= hi,
            (ParamSpec::IntUniform { lo, hi, .. }, Some(v)) => {
                v.fract() == 0.0 && *lo as f64 <= *v && *v <= *hi as f64
            }
            (ParamSpec::Choice { values, .. }, Some(v)) => values.contains(v),
            (_, None) => false,
        })
    }
}

/// Overrides the known training fields present in `config`.
pub fn apply_config(config: &Config, base: &TrainConfig) -> TrainConfig {
    let mut out = base.clone();
    for (name, &v) in config {
        match name.as_str() {
            "learning_rate" => out.learning_rate = v,
            "batch_size" => out.batch_size = v.round().max(1.0) as usize,
            "lstm_layers" => out.lstm_layers = v.round().max(0.0) as usize,
            "dropout_rate" => out.dropout_rate = v,
            "hidden_size" => out.hidden_size = v.round().max(1.0) as usize,
            "epochs" => out.epochs = v.round().max(0.0) as usize,
            _ => {}
        }
    }
    out
}
