//! ε-DP logistic regression by output perturbation.
//!
//! Rows are divided by `data_norm` and augmented with a bias coordinate,
//! `x̃ = [x / R, 1] / √2`, so `‖x̃‖ ≤ 1`. The regularized objective
//! `(1/n) Σ ℓ(w·x̃ᵢ, yᵢ) + (λ/2)‖w‖²` is then `λ`-strongly convex with
//! 1-Lipschitz loss, and its minimizer has L2 sensitivity `2/(nλ)`.

use rand_distr::{Gamma, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky, cholesky_solve, dot, norm2, sigmoid, softplus, Matrix};

const NEWTON_MAX_ITERS: usize = 100;
const NEWTON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DpLogisticRegression {
    /// Coefficients over the augmented, rescaled features; the last entry is the bias.
    pub weights: Vec<f64>,
    pub data_norm: f64,
    pub epsilon: f64,
    pub lambda: f64,
    /// The perturbation added to the non-private minimizer.
    pub noise: Vec<f64>,
}

impl DpLogisticRegression {
    fn augment(x: &[f64], data_norm: f64) -> Vec<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut out: Vec<f64> = x.iter().map(|v| v / data_norm * s).collect();
        out.push(s);
        out
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        dot(&self.weights, &Self::augment(x, self.data_norm))
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.logit(x) >= 0.0)
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[u8]) -> f64 {
        let correct = x.iter().zip(y).filter(|(r, &l)| self.predict(r) == l).count();
        correct as f64 / x.len().max(1) as f64
    }
}

fn check_inputs(x: &[Vec<f64>], y: &[u8], data_norm: f64, lambda: f64) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.len(), y.len())));
    }
    if !(data_norm > 0.0) || !data_norm.is_finite() {
        return Err(invalid("data_norm must be positive"));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda must be positive"));
    }
    let d = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::Shape(format!("row {i} has {} features, expected {d}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("row {i}")));
        }
        let n = norm2(row);
        if n > data_norm {
            return Err(invalid(format!("row {i} has norm {n} above data_norm {data_norm}")));
        }
    }
    if y.iter().any(|&l| l > 1) {
        return Err(invalid("labels must be 0 or 1"));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::SingleClass);
    }
    Ok(d)
}

fn objective(xs: &[Vec<f64>], y: &[u8], w: &[f64], lambda: f64) -> f64 {
    let n = xs.len() as f64;
    let loss: f64 = xs
        .iter()
        .zip(y)
        .map(|(x, &l)| {
            let z = dot(w, x);
            softplus(z) - l as f64 * z
        })
        .sum();
    loss / n + 0.5 * lambda * dot(w, w)
}

/// Non-private minimizer of the regularized logistic objective, by damped Newton.
pub fn fit_logistic_regression(x: &[Vec<f64>], y: &[u8], data_norm: f64, lambda: f64) -> Result<DpLogisticRegression> {
    let d = check_inputs(x, y, data_norm, lambda)? + 1;
    let xs: Vec<Vec<f64>> = x.iter().map(|r| DpLogisticRegression::augment(r, data_norm)).collect();
    let n = xs.len() as f64;
    let mut w = vec![0.0; d];

    for _ in 0..NEWTON_MAX_ITERS {
        let mut grad: Vec<f64> = w.iter().map(|v| lambda * v).collect();
        let mut hess = Matrix::identity(d);
        for i in 0..d {
            hess[(i, i)] = lambda;
        }
        for (xi, &l) in xs.iter().zip(y) {
            let p = sigmoid(dot(&w, xi));
            let r = (p - l as f64) / n;
            let s = p * (1.0 - p) / n;
            for a in 0..d {
                grad[a] += r * xi[a];
                for b in 0..=a {
                    hess[(a, b)] += s * xi[a] * xi[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        if norm2(&grad) < NEWTON_TOL {
            break;
        }
        let step = cholesky_solve(&cholesky(&hess)?, &grad);
        let f0 = objective(&xs, y, &w, lambda);
        let slope = dot(&grad, &step);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            if objective(&xs, y, &cand, lambda) <= f0 - 1e-4 * t * slope || t < 1e-10 {
                w = cand;
                break;
            }
            t *= 0.5;
        }
    }

    Ok(DpLogisticRegression {
        weights: w,
        data_norm,
        epsilon: f64::INFINITY,
        lambda,
        noise: vec![0.0; d],
    })
}

/// Draws `b` with density `∝ exp(−ε n λ ‖b‖ / 2)` in `d` dimensions:
/// a uniform direction scaled by a `Gamma(d, 2/(ε n λ))` radius.
pub fn sample_output_noise<R: rand::Rng + ?Sized>(d: usize, epsilon: f64, n: usize, lambda: f64, rng: &mut R) -> Vec<f64> {
    let scale = 2.0 / (epsilon * n as f64 * lambda);
    let radius = Gamma::new(d as f64, scale).map(|g| rng.sample(g)).unwrap_or(0.0);
    let dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let len = norm2(&dir);
    dir.iter().map(|v| v / len * radius).collect()
}

/// Trains the regularized model, then perturbs it for `epsilon`-DP.
pub fn dp_logistic_regression(
    x: &[Vec<f64>],
    y: &[u8],
    epsilon: f64,
    data_norm: f64,
    lambda: f64,
    seed: u64,
) -> Result<DpLogisticRegression> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    let mut model = fit_logistic_regression(x, y, data_norm, lambda)?;
    let mut rng = crate::rng::stream(seed, 0x4450_4c52);
    let noise = sample_output_noise(model.weights.len(), epsilon, x.len(), lambda, &mut rng);
    for (w, b) in model.weights.iter_mut().zip(&noise) {
        *w += b;
    }
    model.noise = noise;
    model.epsilon = epsilon;
    Ok(model)
}
