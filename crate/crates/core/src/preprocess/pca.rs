use serde::{Deserialize, Serialize};

use super::{ColumnMeta, FeatureMatrix};
use crate::error::{invalid, Error, Result};
use crate::linalg::{jacobi_eigen, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` principal axes as rows of length `d`.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of the population covariance, descending.
    pub explained_variance: Vec<f64>,
}

/// Population covariance (divisor `n`) of a complete matrix.
pub fn covariance(x: &FeatureMatrix) -> (Vec<f64>, Matrix) {
    let (n, d) = (x.n, x.d);
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x.values[i * d + j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = Matrix::zeros(d, d);
    for i in 0..n {
        let row = x.row(i);
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in 0..=a {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..=a {
            cov[(a, b)] /= n as f64;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    (mean, cov)
}

/// Flips `v` so its largest-magnitude entry (first one on ties) is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn fit_pca(x: &FeatureMatrix, k: usize) -> Result<PcaModel> {
    x.require_complete("PCA")?;
    x.require_finite()?;
    if x.n < 2 {
        return Err(invalid("PCA needs at least two rows"));
    }
    if k == 0 || k > x.d {
        return Err(invalid(format!("k = {k} outside 1..={}", x.d)));
    }
    let (mean, cov) = covariance(x);
    let eig = jacobi_eigen(&cov)?;
    let mut components: Vec<Vec<f64>> = eig.vectors.into_iter().take(k).collect();
    components.iter_mut().for_each(|c| fix_sign(c));
    let explained_variance = eig.values.into_iter().take(k).map(|v| v.max(0.0)).collect();
    Ok(PcaModel { mean, components, explained_variance })
}

/// Scores `(x − mean) · componentsᵀ`, columns named `pc_1..pc_k`.
pub fn apply_pca(model: &PcaModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    x.require_complete("PCA")?;
    if model.mean.len() != x.d {
        return Err(Error::Shape(format!("PCA fitted on {} columns, got {}", model.mean.len(), x.d)));
    }
    let k = model.components.len();
    let mut values = Vec::with_capacity(x.n * k);
    for i in 0..x.n {
        let row = x.row(i);
        for c in &model.components {
            values.push(c.iter().zip(row).zip(&model.mean).map(|((w, v), m)| w * (v - m)).sum());
        }
    }
    let columns = (1..=k).map(|j| ColumnMeta::new(format!("pc_{j}"), "")).collect();
    FeatureMatrix::from_dense(columns, x.n, values)
}

impl PcaModel {
    /// `mean + scores · components`, one row per score row.
    pub fn reconstruct(&self, scores: &FeatureMatrix) -> Vec<Vec<f64>> {
        (0..scores.n)
            .map(|i| {
                let mut r = self.mean.clone();
                for (s, c) in scores.row(i).iter().zip(&self.components) {
                    for (rj, cj) in r.iter_mut().zip(c) {
                        *rj += s * cj;
                    }
                }
                r
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn m(rows: &[Vec<f64>]) -> FeatureMatrix {
        let d = rows[0].len();
        let cols = (0..d).map(|j| ColumnMeta::new(format!("c{j}"), "")).collect();
        FeatureMatrix::from_rows(cols, rows).unwrap()
    }

    fn random(n: usize, d: usize, seed: u64) -> FeatureMatrix {
        let mut r = rng::seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|j| r.gen_range(-1.0..1.0) * (j + 1) as f64).collect()).collect();
        m(&rows)
    }

    #[test]
    fn rank_one_direction() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let p = fit_pca(&m(&rows), 2).unwrap();
        assert!(p.explained_variance[1].abs() < 1e-12);
        let s5 = 5f64.sqrt();
        assert!((p.components[0][0] - 1.0 / s5).abs() < 1e-12);
        assert!((p.components[0][1] - 2.0 / s5).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_sum_to_trace() {
        let x = random(50, 6, 1);
        let p = fit_pca(&x, 6).unwrap();
        let (_, cov) = covariance(&x);
        assert!((p.explained_variance.iter().sum::<f64>() - cov.trace()).abs() < 1e-8);
    }

    #[test]
    fn components_orthonormal_and_scores_decorrelated() {
        let x = random(80, 5, 2);
        let p = fit_pca(&x, 3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = p.components[a].iter().zip(&p.components[b]).map(|(u, v)| u * v).sum();
                assert!((dot - f64::from(a == b)).abs() < 1e-10);
            }
        }
        let scores = apply_pca(&p, &x).unwrap();
        let (_, cov) = covariance(&scores);
        for a in 0..3 {
            for b in 0..3 {
                let expect = if a == b { p.explained_variance[a] } else { 0.0 };
                assert!((cov[(a, b)] - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sign_convention() {
        let p = fit_pca(&random(30, 4, 3), 4).unwrap();
        for c in &p.components {
            let big = c.iter().cloned().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn invalid_k_and_input() {
        let x = random(10, 3, 4);
        assert!(fit_pca(&x, 4).is_err());
        assert!(fit_pca(&x, 0).is_err());
        assert!(fit_pca(&m(&[vec![1.0, f64::NAN], vec![1.0, 2.0]]), 1).is_err());
    }

    #[test]
    fn top_k_reconstruction_beats_other_bases() {
        // Squared reconstruction error of the PCA basis is no worse than
        // that of random orthonormal rank-k bases.
        let x = random(40, 4, 5);
        let p = fit_pca(&x, 2).unwrap();
        let scores = apply_pca(&p, &x).unwrap();
        let err = |recon: &[Vec<f64>]| -> f64 {
            recon.iter().enumerate().map(|(i, r)| r.iter().zip(x.row(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum()
        };
        let best = err(&p.reconstruct(&scores));
        let mut r = rng::seeded(6);
        for _ in 0..50 {
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for _ in 0..2 {
                let mut v: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
                for b in &basis {
                    let d: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                    v.iter_mut().zip(b).for_each(|(a, c)| *a -= d * c);
                }
                let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                v.iter_mut().for_each(|a| *a /= n);
                basis.push(v);
            }
            let other = PcaModel { mean: p.mean.clone(), components: basis, explained_variance: vec![0.0; 2] };
            let s = apply_pca(&other, &x).unwrap();
            assert!(best <= err(&other.reconstruct(&s)) + 1e-9);
        }
    }
}
