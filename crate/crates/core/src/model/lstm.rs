//! Single LSTM layer: forward over a sequence with a cache, and exact BPTT.

use super::params::{LstmLayer, GATE_CANDIDATE, GATE_FORGET, GATE_INPUT, GATE_OUTPUT};
use crate::error::{Error, Result};
use crate::linalg::sigmoid;

/// Activations of one layer over a sequence, enough for exact backprop.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub inputs: Vec<Vec<f64>>,
    /// `hs[0]` is the initial state; `hs[t + 1]` follows step `t`.
    pub hs: Vec<Vec<f64>>,
    pub cs: Vec<Vec<f64>>,
    /// Post-activation gates per step, in gate order (i, f, o, c̃).
    pub gates: Vec<[Vec<f64>; 4]>,
    pub tanh_c: Vec<Vec<f64>>,
}

impl LstmTrace {
    /// Hidden states h₁..h_T.
    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.hs[1..]
    }
}

pub fn lstm_forward(layer: &LstmLayer, seq: &[Vec<f64>], h0: &[f64], c0: &[f64]) -> Result<LstmTrace> {
    let h = layer.hidden();
    let x = layer.input();
    if h0.len() != h || c0.len() != h {
        return Err(Error::Shape(format!("initial state must have length {h}")));
    }
    if let Some(bad) = seq.iter().position(|s| s.len() != x) {
        return Err(Error::Shape(format!("step {bad} has width {}, expected {x}", seq[bad].len())));
    }

    let mut trace = LstmTrace {
        inputs: seq.to_vec(),
        hs: vec![h0.to_vec()],
        cs: vec![c0.to_vec()],
        gates: Vec::with_capacity(seq.len()),
        tanh_c: Vec::with_capacity(seq.len()),
    };

    for xt in seq {
        let h_prev = trace.hs.last().expect("initial state");
        let c_prev = trace.cs.last().expect("initial state");
        let gates: [Vec<f64>; 4] = std::array::from_fn(|g| {
            let mut a = layer.b[g].data.clone();
            layer.w[g].matvec_add(xt, &mut a);
            layer.u[g].matvec_add(h_prev, &mut a);
            if g == GATE_CANDIDATE {
                a.iter_mut().for_each(|v| *v = v.tanh());
            } else {
                a.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            a
        });
        let c: Vec<f64> = (0..h)
            .map(|k| gates[GATE_FORGET][k] * c_prev[k] + gates[GATE_INPUT][k] * gates[GATE_CANDIDATE][k])
            .collect();
        let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let hn: Vec<f64> = (0..h).map(|k| gates[GATE_OUTPUT][k] * tc[k]).collect();
        trace.gates.push(gates);
        trace.cs.push(c);
        trace.tanh_c.push(tc);
        trace.hs.push(hn);
    }
    Ok(trace)
}

/// Backpropagates `dh[t] = ∂L/∂h_{t+1}` through the layer, accumulating
/// parameter gradients into `grads` and returning `∂L/∂x_t` per step.
pub fn lstm_backward(layer: &LstmLayer, trace: &LstmTrace, dh: &[Vec<f64>], grads: &mut LstmLayer) -> Vec<Vec<f64>> {
    let h = layer.hidden();
    let steps = trace.gates.len();
    let mut dx = vec![vec![0.0; layer.input()]; steps];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];

    for t in (0..steps).rev() {
        let [gi, gf, go, gc] = &trace.gates[t];
        let tc = &trace.tanh_c[t];
        let c_prev = &trace.cs[t];
        let h_prev = &trace.hs[t];

        let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; h]);
        for k in 0..h {
            let dhk = dh[t][k] + dh_next[k];
            let d_o = dhk * tc[k];
            let dc = dhk * go[k] * (1.0 - tc[k] * tc[k]) + dc_next[k];
            let di = dc * gc[k];
            let dg = dc * gi[k];
            let df = dc * c_prev[k];
            dc_next[k] = dc * gf[k];
            da[GATE_INPUT][k] = di * gi[k] * (1.0 - gi[k]);
            da[GATE_FORGET][k] = df * gf[k] * (1.0 - gf[k]);
            da[GATE_OUTPUT][k] = d_o * go[k] * (1.0 - go[k]);
            da[GATE_CANDIDATE][k] = dg * (1.0 - gc[k] * gc[k]);
        }

        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for g in 0..4 {
            grads.w[g].outer_add(&da[g], &trace.inputs[t]);
            grads.u[g].outer_add(&da[g], h_prev);
            grads.b[g].add_assign(&da[g]);
            layer.w[g].matvec_t_add(&da[g], &mut dx[t]);
            layer.u[g].matvec_t_add(&da[g], &mut dh_next);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn tensor_mut(l: &mut LstmLayer, which: usize, g: usize) -> &mut crate::model::Tensor {
        match which {
            0 => &mut l.w[g],
            1 => &mut l.u[g],
            _ => &mut l.b[g],
        }
    }

    fn random_layer(x: usize, h: usize, seed: u64) -> LstmLayer {
        let mut r = rng::seeded(seed);
        let mut layer = LstmLayer::zeros(x, h);
        for g in 0..4 {
            for t in [&mut layer.w[g], &mut layer.u[g], &mut layer.b[g]] {
                t.data.iter_mut().for_each(|v| *v = r.gen_range(-0.8..0.8));
            }
        }
        layer
    }

    #[test]
    fn zero_everything_is_a_fixed_point() {
        let layer = LstmLayer::zeros(3, 4);
        let seq = vec![vec![0.0; 3]; 5];
        let tr = lstm_forward(&layer, &seq, &[0.0; 4], &[0.0; 4]).unwrap();
        assert!(tr.outputs().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_is_one_cell_application() {
        let layer = random_layer(2, 3, 1);
        let x = vec![0.3, -0.7];
        let h0 = vec![0.1, 0.2, -0.1];
        let c0 = vec![0.5, -0.5, 0.0];
        let tr = lstm_forward(&layer, std::slice::from_ref(&x), &h0, &c0).unwrap();
        for k in 0..3 {
            let pre = |g: usize| {
                layer.b[g].data[k]
                    + (0..2).map(|j| layer.w[g].at(k, j) * x[j]).sum::<f64>()
                    + (0..3).map(|j| layer.u[g].at(k, j) * h0[j]).sum::<f64>()
            };
            let i = sigmoid(pre(0));
            let f = sigmoid(pre(1));
            let o = sigmoid(pre(2));
            let g = pre(3).tanh();
            let c = f * c0[k] + i * g;
            assert!((tr.hs[1][k] - o * c.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let layer = LstmLayer::zeros(3, 4);
        assert!(lstm_forward(&layer, &[vec![0.0; 2]], &[0.0; 4], &[0.0; 4]).is_err());
        assert!(lstm_forward(&layer, &[vec![0.0; 3]], &[0.0; 3], &[0.0; 4]).is_err());
    }

    /// Loss = Σ_t r_t · h_t for fixed random r; checked against central differences.
    #[test]
    fn bptt_matches_finite_differences() {
        let (x, h, steps) = (3, 4, 5);
        for seed in 0..3 {
            let layer = random_layer(x, h, seed);
            let mut r = rng::seeded(100 + seed);
            let seq: Vec<Vec<f64>> = (0..steps).map(|_| (0..x).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
            let proj: Vec<Vec<f64>> = (0..steps).map(|_| (0..h).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
            let zeros = vec![0.0; h];
            let loss = |l: &LstmLayer, s: &[Vec<f64>]| -> f64 {
                let tr = lstm_forward(l, s, &zeros, &zeros).unwrap();
                tr.outputs().iter().zip(&proj).map(|(ht, p)| ht.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()).sum()
            };
            let tr = lstm_forward(&layer, &seq, &zeros, &zeros).unwrap();
            let mut grads = LstmLayer::zeros(x, h);
            let dx = lstm_backward(&layer, &tr, &proj, &mut grads);

            let eps = 1e-5;
            let check = |analytic: f64, numeric: f64| {
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(rel < 1e-4, "analytic {analytic} numeric {numeric}");
            };
            for g in 0..4 {
                for which in 0..3 {
                    let n = [layer.w[g].len(), layer.u[g].len(), layer.b[g].len()][which];
                    for idx in 0..n {
                        let mut plus = layer.clone();
                        let mut minus = layer.clone();
                        tensor_mut(&mut plus, which, g).data[idx] += eps;
                        tensor_mut(&mut minus, which, g).data[idx] -= eps;
                        let numeric = (loss(&plus, &seq) - loss(&minus, &seq)) / (2.0 * eps);
                        let analytic = [&grads.w[g], &grads.u[g], &grads.b[g]][which].data[idx];
                        check(analytic, numeric);
                    }
                }
            }
            for t in 0..steps {
                for j in 0..x {
                    let mut sp = seq.clone();
                    let mut sm = seq.clone();
                    sp[t][j] += eps;
                    sm[t][j] -= eps;
                    check(dx[t][j], (loss(&layer, &sp) - loss(&layer, &sm)) / (2.0 * eps));
                }
            }
        }
    }
}
