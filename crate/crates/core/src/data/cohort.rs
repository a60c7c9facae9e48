//! Synthetic cohorts with a known logistic ground truth.
//!
//! Each row draws standardized latent values `z` for the named clinical
//! features, a label `y ~ Bernoulli(σ(b₀ + w·z))`, and a daily glucose series
//! anchored at the fasting glucose with AR(1) noise. Positive patients get an
//! additional linear upward drift, so the Bayes posterior is
//! `σ(b₀ + w·z + LLR(series))` with a closed-form Gaussian likelihood ratio.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::table::{Cell, ColumnType, RawTable};
use super::{series_column, ID_COLUMN, LABEL_COLUMN};
use crate::error::{invalid, Result};
use crate::linalg::sigmoid;
use crate::model::metrics::auc;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticFeature {
    pub name: &'static str,
    pub unit: &'static str,
    pub mean: f64,
    pub sd: f64,
}

pub const NAMED_FEATURES: [StaticFeature; 5] = [
    StaticFeature { name: "fasting_glucose", unit: "mg/dL", mean: 100.0, sd: 15.0 },
    StaticFeature { name: "hba1c", unit: "%", mean: 5.6, sd: 0.6 },
    StaticFeature { name: "bmi", unit: "kg/m2", mean: 27.0, sd: 5.0 },
    StaticFeature { name: "age", unit: "years", mean: 50.0, sd: 12.0 },
    StaticFeature { name: "systolic_bp", unit: "mmHg", mean: 125.0, sd: 15.0 },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub n: usize,
    pub seed: u64,
    pub prevalence: f64,
    pub missing_rate: f64,
    pub n_noise_features: usize,
    /// Logit coefficients on the standardized named features, in `NAMED_FEATURES` order.
    pub effect_weights: Vec<f64>,
    /// Upward drift (mg/dL) reached on the last day of a positive patient's series.
    pub series_signal: f64,
    pub series_len: usize,
    /// Marginal standard deviation (mg/dL) of the AR(1) series noise.
    pub series_noise: f64,
    /// AR(1) coefficient of the series noise.
    pub series_autocorrelation: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n: 1000,
            seed: 0,
            prevalence: 0.3,
            missing_rate: 0.02,
            n_noise_features: 3,
            effect_weights: vec![1.6, 1.3, 1.1, 0.6, 0.4],
            series_signal: 8.0,
            series_len: 7,
            series_noise: 6.0,
            series_autocorrelation: 0.6,
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prevalence) {
            return Err(invalid(format!("prevalence {} outside [0, 1]", self.prevalence)));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(invalid(format!("missing_rate {} outside [0, 1)", self.missing_rate)));
        }
        if self.effect_weights.len() != NAMED_FEATURES.len() {
            return Err(invalid(format!(
                "expected {} effect weights, got {}",
                NAMED_FEATURES.len(),
                self.effect_weights.len()
            )));
        }
        if self.series_len == 0 {
            return Err(invalid("series_len must be at least 1"));
        }
        if self.series_noise <= 0.0 || !(0.0..1.0).contains(&self.series_autocorrelation.abs()) {
            return Err(invalid("series noise must be positive with |autocorrelation| < 1"));
        }
        let all_finite = self
            .effect_weights
            .iter()
            .chain([&self.series_signal, &self.series_noise])
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(invalid("non-finite generator parameter"));
        }
        Ok(())
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec![ID_COLUMN.to_string()];
        h.extend(NAMED_FEATURES.iter().map(|f| f.name.to_string()));
        h.extend((1..=self.n_noise_features).map(|k| format!("noise_{k}")));
        h.extend((1..=self.series_len).map(series_column));
        h.push(LABEL_COLUMN.to_string());
        h
    }

    fn drift(&self, day: usize) -> f64 {
        self.series_signal * day as f64 / self.series_len as f64
    }

    /// Sum of squared standardized AR(1) innovations of `e`.
    fn innovation_energy(&self, e: &[f64]) -> f64 {
        let phi = self.series_autocorrelation;
        let tau = self.series_noise;
        let inner = tau * (1.0 - phi * phi).sqrt();
        let mut q = (e[0] / tau).powi(2);
        for t in 1..e.len() {
            q += ((e[t] - phi * e[t - 1]) / inner).powi(2);
        }
        q
    }

    /// Log-likelihood ratio of a complete series under `y = 1` versus `y = 0`.
    pub fn series_llr(&self, fasting_glucose: f64, series: &[f64]) -> f64 {
        let e0: Vec<f64> = series.iter().map(|s| s - fasting_glucose).collect();
        let e1: Vec<f64> = e0
            .iter()
            .enumerate()
            .map(|(t, e)| e - self.drift(t + 1))
            .collect();
        0.5 * (self.innovation_energy(&e0) - self.innovation_energy(&e1))
    }
}

/// Intercept `b₀` with `E[σ(b₀ + ‖w‖·Z)] = prevalence` for standard normal `Z`.
pub fn solve_intercept(weights: &[f64], prevalence: f64) -> f64 {
    if prevalence <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if prevalence >= 1.0 {
        return f64::INFINITY;
    }
    let s = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let mean_rate = |b0: f64| -> f64 {
        // Composite Simpson over [-12, 12].
        let m = 2400;
        let (a, b) = (-12.0, 12.0);
        let h = (b - a) / m as f64;
        let f = |z: f64| sigmoid(b0 + s * z) * (-0.5 * z * z).exp();
        let mut acc = f(a) + f(b);
        for i in 1..m {
            let z = a + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(z);
        }
        acc * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
    };
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_rate(mid) < prevalence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

struct Row {
    cells: Vec<Cell>,
    oracle_logit: f64,
}

fn generate_row(spec: &CohortSpec, intercept: f64, index: usize) -> Row {
    let mut rng = rng::stream(spec.seed, index as u64);
    let z: Vec<f64> = (0..NAMED_FEATURES.len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let noise: Vec<f64> = (0..spec.n_noise_features)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let linear = intercept
        + spec
            .effect_weights
            .iter()
            .zip(&z)
            .map(|(w, z)| w * z)
            .sum::<f64>();
    let u: f64 = rng.gen();
    let label = u < sigmoid(linear);

    let phi = spec.series_autocorrelation;
    let tau = spec.series_noise;
    let mut e = Vec::with_capacity(spec.series_len);
    for t in 0..spec.series_len {
        let eps: f64 = rng.sample(StandardNormal);
        let next = if t == 0 {
            tau * eps
        } else {
            phi * e[t - 1] + (1.0 - phi * phi).sqrt() * tau * eps
        };
        e.push(next);
    }

    let statics: Vec<f64> = NAMED_FEATURES
        .iter()
        .zip(&z)
        .map(|(f, z)| f.mean + f.sd * z)
        .collect();
    let fasting = statics[0];
    let series: Vec<f64> = e
        .iter()
        .enumerate()
        .map(|(t, e)| fasting + e + if label { spec.drift(t + 1) } else { 0.0 })
        .collect();

    let oracle_logit = linear + spec.series_llr(fasting, &series);

    let mut cells = Vec::with_capacity(spec.header().len());
    cells.push(Cell::Text(format!("P{index:07}")));
    for v in statics.iter().chain(&noise).chain(&series) {
        let missing = rng.gen::<f64>() < spec.missing_rate;
        cells.push(if missing { Cell::Null } else { Cell::Real(*v) });
    }
    cells.push(Cell::Integer(label as i64));
    Row {
        cells,
        oracle_logit,
    }
}

/// Generates a cohort plus the Bayes-optimal posterior logit of every row,
/// computed from the complete (pre-missingness) values.
pub fn generate_cohort_with_oracle(spec: &CohortSpec) -> Result<(RawTable, Vec<f64>)> {
    spec.validate()?;
    let header = spec.header();
    let mut types = vec![ColumnType::Real; header.len()];
    types[0] = ColumnType::Text;
    *types.last_mut().expect("label column") = ColumnType::Integer;
    let mut table = RawTable::new(header, types);
    let intercept = solve_intercept(&spec.effect_weights, spec.prevalence);
    let mut oracle = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let row = generate_row(spec, intercept, i);
        table.rows.push(row.cells);
        oracle.push(row.oracle_logit);
    }
    Ok((table, oracle))
}

pub fn generate_cohort(spec: &CohortSpec) -> Result<RawTable> {
    generate_cohort_with_oracle(spec).map(|(t, _)| t)
}

/// AUC of the Bayes-optimal posterior on a fresh cohort of `n` rows.
pub fn bayes_auc(spec: &CohortSpec, n: usize) -> Result<f64> {
    let spec = CohortSpec { n, ..spec.clone() };
    let (table, oracle) = generate_cohort_with_oracle(&spec)?;
    let labels: Vec<bool> = table
        .rows
        .iter()
        .map(|r| matches!(r.last(), Some(Cell::Integer(1))))
        .collect();
    Ok(auc(&oracle, &labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn positives(t: &RawTable) -> usize {
        t.rows
            .iter()
            .filter(|r| matches!(r.last(), Some(Cell::Integer(1))))
            .count()
    }

    #[test]
    fn empty_cohort_has_header_only() {
        let spec = CohortSpec { n: 0, ..Default::default() };
        let t = generate_cohort(&spec).unwrap();
        assert_eq!(t.n_rows(), 0);
        assert_eq!(t.header, spec.header());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = CohortSpec { n: 200, seed: 9, ..Default::default() };
        let a = crate::data::write_table(&generate_cohort(&spec).unwrap()).unwrap();
        let b = crate::data::write_table(&generate_cohort(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn positive_count_within_binomial_interval() {
        // Central 99.9% interval of Binomial(10000, 0.3): quantiles at
        // 0.0005 and 0.9995 are 2850 and 3151.
        let spec = CohortSpec { n: 10_000, seed: 1, prevalence: 0.3, ..Default::default() };
        let k = positives(&generate_cohort(&spec).unwrap());
        assert!((2850..=3151).contains(&k), "positives = {k}");
    }

    #[test]
    fn extreme_prevalence() {
        for (p, expect) in [(0.0, 0), (1.0, 50)] {
            let spec = CohortSpec { n: 50, prevalence: p, ..Default::default() };
            assert_eq!(positives(&generate_cohort(&spec).unwrap()), expect);
        }
    }

    #[test]
    fn missing_rate_is_respected() {
        let spec = CohortSpec { n: 2000, missing_rate: 0.25, ..Default::default() };
        let t = generate_cohort(&spec).unwrap();
        let cells: usize = t.rows.len() * (t.header.len() - 2);
        let nulls = t.rows.iter().flatten().filter(|c| c.is_null()).count();
        let rate = nulls as f64 / cells as f64;
        assert!((rate - 0.25).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn intercept_hits_prevalence() {
        let w = [1.0, 2.0];
        let b0 = solve_intercept(&w, 0.5);
        assert!(b0.abs() < 1e-9);
        let b0 = solve_intercept(&w, 0.2);
        assert!(b0 < 0.0);
    }

    #[test]
    fn llr_is_zero_without_signal() {
        let spec = CohortSpec { series_signal: 0.0, ..Default::default() };
        assert_eq!(spec.series_llr(100.0, &[101.0, 99.0, 104.0, 97.0, 100.0, 100.0, 98.0]), 0.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(CohortSpec { prevalence: 1.5, ..Default::default() }.validate().is_err());
        assert!(CohortSpec { missing_rate: 1.0, ..Default::default() }.validate().is_err());
        assert!(CohortSpec { effect_weights: vec![1.0], ..Default::default() }.validate().is_err());
        assert!(CohortSpec { series_len: 0, ..Default::default() }.validate().is_err());
    }
}
