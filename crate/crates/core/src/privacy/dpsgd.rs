use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::norm2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpParams {
    pub epsilon: f64,
    pub delta: f64,
    /// L2 bound on every per-example gradient.
    pub clip_norm: f64,
    /// Noise standard deviation in units of `clip_norm`.
    pub noise_multiplier: f64,
    pub lot_size: usize,
}

impl Default for DpParams {
    fn default() -> Self {
        DpParams {
            epsilon: 0.1,
            delta: 1e-5,
            clip_norm: 1.0,
            noise_multiplier: 0.1,
            lot_size: 128,
        }
    }
}

impl DpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(invalid("delta outside [0, 1)"));
        }
        if !(self.clip_norm > 0.0) || !self.clip_norm.is_finite() {
            return Err(invalid("clip_norm must be positive"));
        }
        if !(self.noise_multiplier >= 0.0) || !self.noise_multiplier.is_finite() {
            return Err(invalid("noise_multiplier must be nonnegative"));
        }
        Ok(())
    }
}

/// Scales `g` down to L2 norm `c` when it is longer.
pub fn clip_to_norm(g: &[f64], c: f64) -> Vec<f64> {
    let n = norm2(g);
    let factor = if n > c { c / n } else { 1.0 };
    g.iter().map(|v| v * factor).collect()
}

/// Clips each per-example gradient to `clip_norm`, averages over the `B`
/// examples and adds `N(0, (σC/B)²)` noise to every coordinate.
pub fn dpsgd_sanitize<R: rand::Rng + ?Sized>(grads: &[Vec<f64>], params: &DpParams, rng: &mut R) -> Result<Vec<f64>> {
    let b = grads.len();
    if b == 0 {
        return Err(invalid("dpsgd needs at least one gradient"));
    }
    if !(params.clip_norm > 0.0) || !(params.noise_multiplier >= 0.0) {
        return Err(invalid("clip_norm must be positive and noise_multiplier nonnegative"));
    }
    let p = grads[0].len();
    if grads.iter().any(|g| g.len() != p) {
        return Err(Error::Shape("per-example gradients differ in length".into()));
    }
    if grads.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("per-example gradient".into()));
    }

    let mut out = vec![0.0; p];
    for g in grads {
        for (o, v) in out.iter_mut().zip(clip_to_norm(g, params.clip_norm)) {
            *o += v;
        }
    }
    let std = params.noise_multiplier * params.clip_norm / b as f64;
    for o in out.iter_mut() {
        *o /= b as f64;
        if std > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            *o += std * z;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn params(sigma: f64) -> DpParams {
        DpParams { noise_multiplier: sigma, clip_norm: 1.0, ..Default::default() }
    }

    #[test]
    fn no_noise_small_gradients_average() {
        let g = vec![vec![0.1, 0.2], vec![0.3, -0.4]];
        let out = dpsgd_sanitize(&g, &params(0.0), &mut rng::seeded(0)).unwrap();
        assert!((out[0] - 0.2).abs() < 1e-15 && (out[1] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn single_long_gradient_is_clipped_to_c() {
        let g = vec![vec![1.2, 1.6]]; // norm 2 = 2C
        let out = dpsgd_sanitize(&g, &params(0.0), &mut rng::seeded(0)).unwrap();
        assert!((norm2(&out) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let mut r = rng::seeded(0);
        assert!(dpsgd_sanitize(&[], &params(0.1), &mut r).is_err());
        assert!(matches!(
            dpsgd_sanitize(&[vec![f64::NAN]], &params(0.1), &mut r),
            Err(Error::NonFinite(_))
        ));
        assert!(dpsgd_sanitize(&[vec![1.0], vec![1.0, 2.0]], &params(0.1), &mut r).is_err());
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let g = vec![vec![0.5; 4]; 3];
        let a = dpsgd_sanitize(&g, &params(0.1), &mut rng::seeded(9)).unwrap();
        let b = dpsgd_sanitize(&g, &params(0.1), &mut rng::seeded(9)).unwrap();
        assert_eq!(a, b);
    }
}
