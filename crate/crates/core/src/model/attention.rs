//! Additive attention pooling: `score_t = v·tanh(h_t) + b`, softmax weights,
//! context `Σ w_t h_t`.

#[derive(Debug, Clone)]
pub struct AttentionTrace {
    pub tanh_h: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Pools `hs` (T × h, T ≥ 1) into a context vector and per-step weights.
pub fn attention_pool(hs: &[Vec<f64>], v: &[f64], bias: f64) -> AttentionTrace {
    assert!(!hs.is_empty(), "attention over an empty sequence");
    let tanh_h: Vec<Vec<f64>> = hs.iter().map(|h| h.iter().map(|x| x.tanh()).collect()).collect();
    let scores: Vec<f64> = tanh_h
        .iter()
        .map(|th| th.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() + bias)
        .collect();
    let weights = softmax(&scores);
    let mut context = vec![0.0; v.len()];
    for (w, h) in weights.iter().zip(hs) {
        for (c, x) in context.iter_mut().zip(h) {
            *c += w * x;
        }
    }
    AttentionTrace {
        tanh_h,
        weights,
        context,
    }
}

/// Returns `∂L/∂h_t` and accumulates `∂L/∂v`, `∂L/∂b` given `∂L/∂context`.
pub fn attention_backward(
    hs: &[Vec<f64>],
    v: &[f64],
    trace: &AttentionTrace,
    d_context: &[f64],
    dv: &mut [f64],
    db: &mut f64,
) -> Vec<Vec<f64>> {
    let dw: Vec<f64> = hs
        .iter()
        .map(|h| h.iter().zip(d_context).map(|(a, b)| a * b).sum())
        .collect();
    let mean: f64 = trace.weights.iter().zip(&dw).map(|(w, d)| w * d).sum();
    let mut dh = Vec::with_capacity(hs.len());
    for t in 0..hs.len() {
        let w = trace.weights[t];
        let ds = w * (dw[t] - mean);
        *db += ds;
        let th = &trace.tanh_h[t];
        let row: Vec<f64> = (0..v.len())
            .map(|k| {
                dv[k] += ds * th[k];
                w * d_context[k] + ds * v[k] * (1.0 - th[k] * th[k])
            })
            .collect();
        dh.push(row);
    }
    dh
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_rows_give_uniform_weights() {
        let hs = vec![vec![0.3, -0.2]; 4];
        let tr = attention_pool(&hs, &[1.0, 2.0], 0.5);
        for w in &tr.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn single_step_weight_is_one() {
        let hs = vec![vec![0.7, -0.1, 0.2]];
        let tr = attention_pool(&hs, &[0.4, 0.4, 0.4], -3.0);
        assert_eq!(tr.weights, vec![1.0]);
        assert_eq!(tr.context, hs[0]);
    }

    #[test]
    fn bias_shift_leaves_weights_unchanged() {
        let hs = vec![vec![0.1, 0.9], vec![-0.4, 0.3], vec![0.8, -0.6]];
        let v = [1.5, -0.7];
        let a = attention_pool(&hs, &v, 0.0);
        let b = attention_pool(&hs, &v, 12.5);
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-15);
        }
        let total: f64 = a.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_stable_for_large_scores() {
        let w = softmax(&[1000.0, 1000.0, -1000.0]);
        assert!((w[0] - 0.5).abs() < 1e-15 && w[2] == 0.0);
    }
}
