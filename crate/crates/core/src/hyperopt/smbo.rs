//! Sequential model-based proposals: a Gaussian-process surrogate over the
//! encoded search cube and expected improvement over sampled candidates.

use rand::Rng;
use rand_distr::StandardNormal;

use super::asha::Objective;
use super::space::{Config, SearchSpace};
use crate::error::Result;
use crate::linalg::{cholesky, cholesky_solve, forward_solve, Matrix};

/// Predictive mean and standard deviation over encoded configs.
pub trait Surrogate {
    fn fit(&mut self, x: &[Vec<f64>], y: &[f64]) -> Result<()>;
    fn predict(&self, x: &[f64]) -> (f64, f64);
}

const LENGTH_SCALES: [f64; 7] = [0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0];
const NOISES: [f64; 3] = [1e-6, 1e-3, 1e-2];

/// Zero-mean GP with a squared-exponential kernel on standardized targets.
/// Length scale and noise come from a small grid by marginal likelihood.
#[derive(Debug, Clone, Default)]
pub struct GpSurrogate {
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_std: f64,
    length_scale: f64,
    chol: Option<Matrix>,
    alpha: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

impl GpSurrogate {
    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    fn kernel(&self, a: &[f64], b: &[f64], ls: f64) -> f64 {
        (-0.5 * sq_dist(a, b) / (ls * ls)).exp()
    }

    fn gram(&self, ls: f64, noise: f64) -> Matrix {
        let n = self.x.len();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.kernel(&self.x[i], &self.x[j], ls);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += noise;
        }
        k
    }
}

impl Surrogate for GpSurrogate {
    fn fit(&mut self, x: &[Vec<f64>], y: &[f64]) -> Result<()> {
        self.x = x.to_vec();
        let n = y.len().max(1) as f64;
        self.y_mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - self.y_mean).powi(2)).sum::<f64>() / n;
        self.y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - self.y_mean) / self.y_std).collect();

        let mut best: Option<(f64, f64, Matrix, Vec<f64>)> = None;
        for &ls in &LENGTH_SCALES {
            for &noise in &NOISES {
                let Ok(l) = cholesky(&self.gram(ls, noise)) else { continue };
                let alpha = cholesky_solve(&l, &ys);
                let fit: f64 = ys.iter().zip(&alpha).map(|(a, b)| a * b).sum();
                let logdet: f64 = (0..l.rows).map(|i| l[(i, i)].ln()).sum();
                let lml = -0.5 * fit - logdet;
                if best.as_ref().is_none_or(|b| lml > b.0) {
                    best = Some((lml, ls, l, alpha));
                }
            }
        }
        if let Some((_, ls, l, alpha)) = best {
            self.length_scale = ls;
            self.chol = Some(l);
            self.alpha = alpha;
        }
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> (f64, f64) {
        let Some(l) = &self.chol else {
            return (self.y_mean, self.y_std);
        };
        let ks: Vec<f64> = self.x.iter().map(|xi| self.kernel(xi, x, self.length_scale)).collect();
        let mean: f64 = ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = forward_solve(l, &ks);
        let var = (1.0 - v.iter().map(|a| a * a).sum::<f64>()).max(0.0);
        (self.y_mean + self.y_std * mean, self.y_std * var.sqrt())
    }
}

/// Expected improvement over `best` for maximization. With zero predictive
/// spread this is the plain improvement `μ − best`, which may be negative,
/// so the argmax is the argmax of the mean.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    let imp = mean - best;
    if std <= 1e-12 {
        return imp;
    }
    let z = imp / std;
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let cdf = 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
    imp * cdf + std * pdf
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateState {
    pub observations: Vec<(Config, f64)>,
    pub mode: Objective,
    pub n_random_candidates: usize,
    pub n_local_candidates: usize,
    /// Below this many observations proposals are plain random samples.
    pub min_observations: usize,
}

impl SurrogateState {
    pub fn new(mode: Objective) -> Self {
        SurrogateState {
            observations: Vec::new(),
            mode,
            n_random_candidates: 256,
            n_local_candidates: 64,
            min_observations: 5,
        }
    }

    pub fn observe(&mut self, config: Config, metric: f64) {
        if metric.is_finite() {
            self.observations.push((config, metric));
        }
    }

    fn score(&self, metric: f64) -> f64 {
        match self.mode {
            Objective::Max => metric,
            Objective::Min => -metric,
        }
    }
}

/// Random configs plus Gaussian perturbations of the best observed one,
/// snapped to valid configs and re-encoded.
pub fn candidates<R: Rng + ?Sized>(state: &SurrogateState, space: &SearchSpace, rng: &mut R) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..state.n_random_candidates)
        .map(|_| space.encode(&space.sample(rng)))
        .collect();
    let best = state
        .observations
        .iter()
        .max_by(|a, b| state.score(a.1).total_cmp(&state.score(b.1)));
    if let Some((cfg, _)) = best {
        let centre = space.encode(cfg);
        for _ in 0..state.n_local_candidates {
            let x: Vec<f64> = centre
                .iter()
                .map(|c| (c + 0.1 * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0))
                .collect();
            out.push(space.encode(&space.decode(&x)));
        }
    }
    out
}

/// Proposes the candidate maximizing expected improvement under `surrogate`.
pub fn propose_with<S: Surrogate, R: Rng + ?Sized>(
    state: &SurrogateState,
    space: &SearchSpace,
    surrogate: &mut S,
    rng: &mut R,
) -> Result<Config> {
    if state.observations.len() < state.min_observations {
        return Ok(space.sample(rng));
    }
    let xs: Vec<Vec<f64>> = state.observations.iter().map(|(c, _)| space.encode(c)).collect();
    let ys: Vec<f64> = state.observations.iter().map(|(_, m)| state.score(*m)).collect();
    surrogate.fit(&xs, &ys)?;
    let best = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut chosen: Option<(f64, Vec<f64>)> = None;
    for c in candidates(state, space, rng) {
        let (m, s) = surrogate.predict(&c);
        let a = expected_improvement(m, s, best);
        if chosen.as_ref().is_none_or(|(b, _)| a > *b) {
            chosen = Some((a, c));
        }
    }
    Ok(match chosen {
        Some((_, x)) => space.decode(&x),
        None => space.sample(rng),
    })
}

pub fn smbo_propose<R: Rng + ?Sized>(state: &SurrogateState, space: &SearchSpace, rng: &mut R) -> Result<Config> {
    propose_with(state, space, &mut GpSurrogate::default(), rng)
}
