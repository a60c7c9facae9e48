use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerModel {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn fit_scaler(x: &FeatureMatrix) -> Result<ScalerModel> {
    x.require_complete("scaling")?;
    x.require_finite()?;
    if x.n == 0 {
        return Err(Error::EmptyInput);
    }
    let (means, stds) = (0..x.d)
        .map(|j| mean_std((0..x.n).map(move |i| x.values[i * x.d + j])))
        .unzip();
    Ok(ScalerModel { means, stds })
}

/// `(x − μ) / s` per column; a column with `s = 0` maps to zeros.
pub fn apply_scaler(model: &ScalerModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    x.require_complete("scaling")?;
    if model.means.len() != x.d {
        return Err(Error::Shape(format!("scaler fitted on {} columns, got {}", model.means.len(), x.d)));
    }
    let mut out = x.clone();
    for (k, v) in out.values.iter_mut().enumerate() {
        let j = k % x.d;
        *v = if model.stds[j] > 0.0 { (*v - model.means[j]) / model.stds[j] } else { 0.0 };
    }
    Ok(out)
}

/// Refits a scaler on the rows of each source separately and standardizes
/// them with their own statistics, so batches from differently calibrated
/// sources land on a common scale.
pub fn standardize_by_source(x: &FeatureMatrix, sources: &[usize]) -> Result<FeatureMatrix> {
    if sources.len() != x.n {
        return Err(Error::Shape(format!("{} source ids for {} rows", sources.len(), x.n)));
    }
    let mut ids: Vec<usize> = sources.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut out = x.clone();
    for id in ids {
        let rows: Vec<usize> = (0..x.n).filter(|&i| sources[i] == id).collect();
        let part = x.select_rows(&rows);
        let scaled = apply_scaler(&fit_scaler(&part)?, &part)?;
        for (r, &i) in rows.iter().enumerate() {
            out.values[i * x.d..(i + 1) * x.d].copy_from_slice(scaled.row(r));
        }
    }
    Ok(out)
}

/// One mean and standard deviation pooled over every cell, so relative
/// differences between columns survive scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledScaler {
    pub mean: f64,
    pub std: f64,
}

impl PooledScaler {
    pub fn fit(x: &FeatureMatrix) -> Result<Self> {
        x.require_complete("scaling")?;
        if x.values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let (mean, std) = mean_std(x.values.iter().copied());
        Ok(PooledScaler { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        if self.std > 0.0 {
            (v - self.mean) / self.std
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::ColumnMeta;
    use proptest::prelude::*;

    fn m(rows: &[Vec<f64>]) -> FeatureMatrix {
        let d = rows[0].len();
        let cols = (0..d).map(|j| ColumnMeta::new(format!("c{j}"), "")).collect();
        FeatureMatrix::from_rows(cols, rows).unwrap()
    }

    #[test]
    fn two_point_example() {
        let x = m(&[vec![1.0], vec![3.0]]);
        let s = fit_scaler(&x).unwrap();
        assert_eq!((s.means[0], s.stds[0]), (2.0, 1.0));
        assert_eq!(apply_scaler(&s, &x).unwrap().values, vec![-1.0, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let x = m(&[vec![5.0], vec![5.0], vec![5.0]]);
        let y = apply_scaler(&fit_scaler(&x).unwrap(), &x).unwrap();
        assert_eq!(y.values, vec![0.0; 3]);
    }

    #[test]
    fn missing_cells_rejected() {
        let x = m(&[vec![1.0], vec![f64::NAN]]);
        assert!(matches!(fit_scaler(&x), Err(Error::MissingCells(_))));
    }

    #[test]
    fn per_source_standardization() {
        let x = m(&[vec![1.0], vec![3.0], vec![100.0], vec![300.0]]);
        let y = standardize_by_source(&x, &[0, 0, 1, 1]).unwrap();
        assert_eq!(y.values, vec![-1.0, 1.0, -1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn standardized_moments(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..40)) {
            let x = m(&rows);
            let y = apply_scaler(&fit_scaler(&x).unwrap(), &x).unwrap();
            for j in 0..3 {
                let col: Vec<f64> = y.column(j).flatten().collect();
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-10);
                let raw: Vec<f64> = x.column(j).flatten().collect();
                let spread = raw.iter().cloned().fold(f64::MIN, f64::max) - raw.iter().cloned().fold(f64::MAX, f64::min);
                if spread > 1e-6 {
                    prop_assert!((var - 1.0).abs() < 1e-8);
                }
            }
        }
    }
}
