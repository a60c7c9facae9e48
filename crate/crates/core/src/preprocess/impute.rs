use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputerModel {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
}

/// Per-column mean over present cells.
pub fn fit_imputer(x: &FeatureMatrix) -> Result<ImputerModel> {
    x.require_finite()?;
    let mut means = Vec::with_capacity(x.d);
    for j in 0..x.d {
        let present: Vec<f64> = x.column(j).flatten().collect();
        if present.is_empty() {
            return Err(Error::EmptyColumn(x.columns[j].name.clone()));
        }
        means.push(present.iter().sum::<f64>() / present.len() as f64);
    }
    Ok(ImputerModel { columns: x.column_names(), means })
}

/// Fills masked cells with the fitted means; the result is fully present.
pub fn apply_imputer(model: &ImputerModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    if model.means.len() != x.d {
        return Err(Error::Shape(format!("imputer fitted on {} columns, got {}", model.means.len(), x.d)));
    }
    let mut out = x.clone();
    for k in 0..out.values.len() {
        if !out.mask[k] {
            out.values[k] = model.means[k % x.d];
            out.mask[k] = true;
        }
    }
    Ok(out)
}
