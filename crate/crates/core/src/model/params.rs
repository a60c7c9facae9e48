use rand::Rng as _;

use super::tensor::Tensor;
use crate::rng::Rng;

/// Gate order inside every LSTM parameter array.
pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_OUTPUT: usize = 2;
pub const GATE_CANDIDATE: usize = 3;
pub const GATE_NAMES: [&str; 4] = ["i", "f", "o", "c"];

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// Input weights, hidden × input.
    pub w: [Tensor; 4],
    /// Recurrent weights, hidden × hidden.
    pub u: [Tensor; 4],
    pub b: [Tensor; 4],
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayer {
            w: std::array::from_fn(|_| Tensor::zeros(&[hidden, input])),
            u: std::array::from_fn(|_| Tensor::zeros(&[hidden, hidden])),
            b: std::array::from_fn(|_| Tensor::zeros(&[hidden])),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b[0].len()
    }

    pub fn input(&self) -> usize {
        self.w[0].cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// out × in
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Tensor::zeros(&[output, input]),
            b: Tensor::zeros(&[output]),
        }
    }

    pub fn output(&self) -> usize {
        self.b.len()
    }
}

/// Every trainable tensor of the fusion classifier. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub lstm: Vec<LstmLayer>,
    pub attn_v: Tensor,
    pub attn_b: Tensor,
    pub mlp: Vec<Dense>,
    pub head: Dense,
}

impl FusionParams {
    pub fn zeros(static_dim: usize, series_dim: usize, hidden: usize, layers: usize, mlp_hidden: &[usize]) -> Self {
        let lstm = (0..layers)
            .map(|l| LstmLayer::zeros(if l == 0 { series_dim } else { hidden }, hidden))
            .collect();
        let mut mlp = Vec::with_capacity(mlp_hidden.len());
        let mut width = static_dim;
        for &h in mlp_hidden {
            mlp.push(Dense::zeros(width, h));
            width = h;
        }
        let context = if layers == 0 { series_dim } else { hidden };
        FusionParams {
            lstm,
            attn_v: Tensor::zeros(&[context]),
            attn_b: Tensor::zeros(&[1]),
            mlp,
            head: Dense::zeros(context + width, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|_, t| t.data.iter_mut().for_each(|v| *v = 0.0));
        z
    }

    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (l, layer) in self.lstm.iter().enumerate() {
            for g in 0..4 {
                out.push((format!("lstm.{l}.w_{}", GATE_NAMES[g]), &layer.w[g]));
                out.push((format!("lstm.{l}.u_{}", GATE_NAMES[g]), &layer.u[g]));
                out.push((format!("lstm.{l}.b_{}", GATE_NAMES[g]), &layer.b[g]));
            }
        }
        out.push(("attn.v".into(), &self.attn_v));
        out.push(("attn.b".into(), &self.attn_b));
        for (k, d) in self.mlp.iter().enumerate() {
            out.push((format!("mlp.{k}.w"), &d.w));
            out.push((format!("mlp.{k}.b"), &d.b));
        }
        out.push(("head.w".into(), &self.head.w));
        out.push(("head.b".into(), &self.head.b));
        out
    }

    /// Visits tensors mutably in the same order as [`FusionParams::tensors`].
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut Tensor)) {
        for (l, layer) in self.lstm.iter_mut().enumerate() {
            for g in 0..4 {
                f(&format!("lstm.{l}.w_{}", GATE_NAMES[g]), &mut layer.w[g]);
                f(&format!("lstm.{l}.u_{}", GATE_NAMES[g]), &mut layer.u[g]);
                f(&format!("lstm.{l}.b_{}", GATE_NAMES[g]), &mut layer.b[g]);
            }
        }
        f("attn.v", &mut self.attn_v);
        f("attn.b", &mut self.attn_b);
        for (k, d) in self.mlp.iter_mut().enumerate() {
            f(&format!("mlp.{k}.w"), &mut d.w);
            f(&format!("mlp.{k}.b"), &mut d.b);
        }
        f("head.w", &mut self.head.w);
        f("head.b", &mut self.head.b);
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.count());
        for (_, t) in self.tensors() {
            v.extend_from_slice(&t.data);
        }
        v
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.count(), "flat parameter length mismatch");
        let mut off = 0;
        self.for_each_mut(|_, t| {
            let n = t.len();
            t.data.copy_from_slice(&flat[off..off + n]);
            off += n;
        });
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &FusionParams) {
        let src = other.flatten();
        let mut off = 0;
        self.for_each_mut(|_, t| {
            for v in t.data.iter_mut() {
                *v += alpha * src[off];
                off += 1;
            }
        });
    }

    pub fn scale(&mut self, alpha: f64) {
        self.for_each_mut(|_, t| t.data.iter_mut().for_each(|v| *v *= alpha));
    }

    /// Uniform(±1/√fan_in). LSTM tensors use the hidden size as fan-in, dense
    /// biases share the bound of their weights, the attention bias starts at 0.
    pub fn init_uniform(&mut self, rng: &mut Rng) {
        fn fill(t: &mut Tensor, fan_in: usize, rng: &mut Rng) {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            for v in t.data.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        for layer in &mut self.lstm {
            let fan = layer.hidden();
            for g in 0..4 {
                fill(&mut layer.w[g], fan, rng);
                fill(&mut layer.u[g], fan, rng);
                fill(&mut layer.b[g], fan, rng);
            }
        }
        let fan = self.attn_v.len();
        fill(&mut self.attn_v, fan, rng);
        self.attn_b.data[0] = 0.0;
        for d in self.mlp.iter_mut().chain(std::iter::once(&mut self.head)) {
            let fan = d.w.cols();
            fill(&mut d.w, fan, rng);
            fill(&mut d.b, fan, rng);
        }
    }
}
