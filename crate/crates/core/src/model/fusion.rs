//! The fusion classifier: stacked LSTM over the glucose series, attention
//! pooling, a tanh MLP over static features, and a dense head on the
//! concatenation `[context ‖ mlp(statics)]`.

use rand::Rng as _;

use super::attention::{attention_backward, attention_pool, AttentionTrace};
use super::config::TrainConfig;
use super::lstm::{lstm_backward, lstm_forward, LstmTrace};
use super::params::FusionParams;
use crate::error::{Error, Result};
use crate::linalg::{sigmoid, softplus};
use crate::rng::{self, Rng};

/// Width of one series step (daily glucose).
pub const SERIES_DIM: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub config: TrainConfig,
    pub static_dim: usize,
    pub params: FusionParams,
}

pub enum Mode<'a> {
    Eval,
    /// Dropout active with inverted scaling, masks drawn from the generator.
    Train(&'a mut Rng),
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub lstm: Vec<LstmTrace>,
    pub attention: AttentionTrace,
    /// `mlp_acts[0]` is the static input; `mlp_acts[k + 1]` follows layer k.
    pub mlp_acts: Vec<Vec<f64>>,
    pub series: Vec<Vec<f64>>,
    pub fused: Vec<f64>,
    pub dropout_mask: Option<Vec<f64>>,
    pub logit: f64,
    pub probability: f64,
}

impl ForwardTrace {
    pub fn attention_weights(&self) -> &[f64] {
        &self.attention.weights
    }
}

#[derive(Debug, Clone)]
pub struct InputGradient {
    pub statics: Vec<f64>,
    pub series: Vec<f64>,
}

/// Binary cross-entropy on a logit, finite for every finite logit.
pub fn bce_with_logit(logit: f64, label: f64) -> f64 {
    softplus(logit) - label * logit
}

impl FusionModel {
    /// All-zero parameters: every prediction is exactly 0.5.
    pub fn zeros(config: &TrainConfig, static_dim: usize) -> Self {
        FusionModel {
            config: config.clone(),
            static_dim,
            params: FusionParams::zeros(
                static_dim,
                SERIES_DIM,
                config.hidden_size,
                config.lstm_layers,
                &config.mlp_hidden,
            ),
        }
    }

    /// Randomly initialized from `config.seed`.
    pub fn new(config: &TrainConfig, static_dim: usize) -> Result<Self> {
        config.validate()?;
        let mut model = FusionModel::zeros(config, static_dim);
        model.params.init_uniform(&mut rng::stream(config.seed, 0));
        Ok(model)
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    fn context_dim(&self) -> usize {
        self.params.attn_v.len()
    }

    pub fn forward(&self, statics: &[f64], series: &[f64], mode: Mode<'_>) -> Result<ForwardTrace> {
        if statics.len() != self.static_dim {
            return Err(Error::Shape(format!(
                "model expects {} static features, got {}",
                self.static_dim,
                statics.len()
            )));
        }
        if series.is_empty() {
            return Err(Error::Shape("series must have at least one step".into()));
        }

        let seq: Vec<Vec<f64>> = series.iter().map(|&v| vec![v]).collect();
        let mut lstm = Vec::with_capacity(self.params.lstm.len());
        for layer in &self.params.lstm {
            let input = lstm.last().map_or(&seq[..], |t: &LstmTrace| t.outputs());
            let zeros = vec![0.0; layer.hidden()];
            lstm.push(lstm_forward(layer, input, &zeros, &zeros)?);
        }
        let top = lstm.last().map_or(&seq[..], |t| t.outputs());
        let attention = attention_pool(top, &self.params.attn_v.data, self.params.attn_b.data[0]);

        let mut mlp_acts = vec![statics.to_vec()];
        for d in &self.params.mlp {
            let mut a = d.b.data.clone();
            d.w.matvec_add(mlp_acts.last().expect("input"), &mut a);
            a.iter_mut().for_each(|v| *v = v.tanh());
            mlp_acts.push(a);
        }

        let mut fused = attention.context.clone();
        fused.extend_from_slice(mlp_acts.last().expect("input"));

        let dropout_mask = match mode {
            Mode::Train(rng) if self.config.dropout_rate > 0.0 => {
                let keep = 1.0 - self.config.dropout_rate;
                Some(
                    (0..fused.len())
                        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect::<Vec<f64>>(),
                )
            }
            _ => None,
        };

        let mut logit = self.params.head.b.data[0];
        for (k, f) in fused.iter().enumerate() {
            let m = dropout_mask.as_ref().map_or(1.0, |m| m[k]);
            logit += self.params.head.w.data[k] * f * m;
        }

        Ok(ForwardTrace {
            lstm,
            attention,
            mlp_acts,
            series: seq,
            fused,
            dropout_mask,
            logit,
            probability: sigmoid(logit),
        })
    }

    pub fn predict(&self, statics: &[f64], series: &[f64]) -> Result<f64> {
        Ok(self.forward(statics, series, Mode::Eval)?.probability)
    }

    /// Adds `∂BCE/∂θ` into `grads`; returns the loss and input gradients.
    pub fn backward_into(&self, trace: &ForwardTrace, label: f64, grads: &mut FusionParams) -> (f64, InputGradient) {
        let p = &self.params;
        let dz = trace.probability - label;
        let loss = bce_with_logit(trace.logit, label);

        let mut d_fused = vec![0.0; trace.fused.len()];
        for k in 0..trace.fused.len() {
            let m = trace.dropout_mask.as_ref().map_or(1.0, |m| m[k]);
            grads.head.w.data[k] += dz * trace.fused[k] * m;
            d_fused[k] = dz * p.head.w.data[k] * m;
        }
        grads.head.b.data[0] += dz;

        let ctx = self.context_dim();
        let (d_context, d_mlp_out) = d_fused.split_at(ctx);

        let mut d_act = d_mlp_out.to_vec();
        for k in (0..p.mlp.len()).rev() {
            let out = &trace.mlp_acts[k + 1];
            let d_pre: Vec<f64> = d_act.iter().zip(out).map(|(d, a)| d * (1.0 - a * a)).collect();
            grads.mlp[k].w.outer_add(&d_pre, &trace.mlp_acts[k]);
            grads.mlp[k].b.add_assign(&d_pre);
            let mut prev = vec![0.0; trace.mlp_acts[k].len()];
            p.mlp[k].w.matvec_t_add(&d_pre, &mut prev);
            d_act = prev;
        }

        let top = trace.lstm.last().map_or(&trace.series[..], |t| t.outputs());
        let mut d_attn_b = 0.0;
        let mut d_h = attention_backward(
            top,
            &p.attn_v.data,
            &trace.attention,
            d_context,
            &mut grads.attn_v.data,
            &mut d_attn_b,
        );
        grads.attn_b.data[0] += d_attn_b;

        for l in (0..p.lstm.len()).rev() {
            d_h = lstm_backward(&p.lstm[l], &trace.lstm[l], &d_h, &mut grads.lstm[l]);
        }

        (
            loss,
            InputGradient {
                statics: d_act,
                series: d_h.into_iter().map(|v| v[0]).collect(),
            },
        )
    }

    pub fn backward(&self, trace: &ForwardTrace, label: f64) -> (FusionParams, f64, InputGradient) {
        let mut grads = self.params.zeros_like();
        let (loss, input) = self.backward_into(trace, label, &mut grads);
        (grads, loss, input)
    }

    /// Eval-mode loss for one example.
    pub fn loss(&self, statics: &[f64], series: &[f64], label: f64) -> Result<f64> {
        Ok(bce_with_logit(self.forward(statics, series, Mode::Eval)?.logit, label))
    }

    /// Gradient of the eval-mode loss with respect to the inputs.
    pub fn input_gradient(&self, statics: &[f64], series: &[f64], label: f64) -> Result<InputGradient> {
        let trace = self.forward(statics, series, Mode::Eval)?;
        let mut scratch = self.params.zeros_like();
        Ok(self.backward_into(&trace, label, &mut scratch).1)
    }
}
