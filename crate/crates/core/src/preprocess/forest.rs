//! Random-forest Gini importance.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{invalid, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams { n_trees: 100, max_depth: 6, min_samples_leaf: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    /// Position of the feature in the fitted matrix.
    pub column: usize,
    pub score: f64,
}

/// Features by descending score, ties in column order. Scores sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub features: Vec<RankedFeature>,
}

impl ImportanceRanking {
    pub fn from_scores(names: &[String], scores: &[f64]) -> Self {
        let mut features: Vec<RankedFeature> = names
            .iter()
            .zip(scores)
            .enumerate()
            .map(|(column, (name, &score))| RankedFeature { name: name.clone(), column, score })
            .collect();
        features.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.column.cmp(&b.column)));
        ImportanceRanking { features }
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn score(&self, name: &str) -> Option<f64> {
        self.features.iter().find(|f| f.name == name).map(|f| f.score)
    }
}

/// The `k` best features; equal scores go to the earlier column.
pub fn select_top_k(ranking: &ImportanceRanking, k: usize) -> Vec<RankedFeature> {
    let mut f = ranking.features.clone();
    f.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.column.cmp(&b.column)));
    f.truncate(k);
    f
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    y: &'a [bool],
    params: &'a RfParams,
    mtry: usize,
    importance: Vec<f64>,
}

impl Grower<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut rng::Rng) {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        if depth >= self.params.max_depth || pos == 0 || pos == n || n < 2 * self.params.min_samples_leaf {
            return;
        }
        let parent = n as f64 * gini(pos, n);
        let d = self.x.d;
        let mut best: Option<(f64, usize, f64)> = None;
        let features = sample(rng, d, self.mtry);
        let mut order: Vec<usize> = idx.to_vec();
        for j in features.iter() {
            order.sort_by(|&a, &b| self.x.values[a * d + j].total_cmp(&self.x.values[b * d + j]));
            let mut left_pos = 0;
            for split in 1..n {
                left_pos += usize::from(self.y[order[split - 1]]);
                let lo = self.x.values[order[split - 1] * d + j];
                let hi = self.x.values[order[split] * d + j];
                if lo == hi || split < self.params.min_samples_leaf || n - split < self.params.min_samples_leaf {
                    continue;
                }
                let child = split as f64 * gini(left_pos, split) + (n - split) as f64 * gini(pos - left_pos, n - split);
                let gain = parent - child;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, j, 0.5 * (lo + hi)));
                }
            }
        }
        let Some((gain, j, threshold)) = best else { return };
        self.importance[j] += gain;
        let mut split = 0;
        for k in 0..n {
            if self.x.values[idx[k] * d + j] <= threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (left, right) = idx.split_at_mut(split);
        self.grow(left, depth + 1, rng);
        self.grow(right, depth + 1, rng);
    }
}

/// Total Gini decrease per feature over a bootstrap forest, normalized to
/// sum to one. If no tree finds a useful split, every feature gets `1/d`.
pub fn rf_importance(x: &FeatureMatrix, y: &[u8], params: &RfParams) -> Result<ImportanceRanking> {
    x.require_complete("random-forest fitting")?;
    x.require_finite()?;
    if x.n == 0 || x.d == 0 {
        return Err(Error::EmptyInput);
    }
    if y.len() != x.n {
        return Err(Error::Shape(format!("{} labels for {} rows", y.len(), x.n)));
    }
    if y.iter().any(|&l| l > 1) {
        return Err(invalid("labels must be 0 or 1"));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::SingleClass);
    }
    if params.n_trees == 0 {
        return Err(invalid("n_trees must be positive"));
    }
    let labels: Vec<bool> = y.iter().map(|&l| l == 1).collect();
    let mut grower = Grower {
        x,
        y: &labels,
        params,
        mtry: ((x.d as f64).sqrt().floor() as usize).max(1),
        importance: vec![0.0; x.d],
    };
    for t in 0..params.n_trees {
        let mut rng = rng::stream(params.seed, t as u64);
        let mut idx: Vec<usize> = (0..x.n).map(|_| rng.gen_range(0..x.n)).collect();
        grower.grow(&mut idx, 0, &mut rng);
    }
    let total: f64 = grower.importance.iter().sum();
    let scores: Vec<f64> = if total > 0.0 {
        grower.importance.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / x.d as f64; x.d]
    };
    Ok(ImportanceRanking::from_scores(&x.column_names(), &scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::ColumnMeta;

    fn threshold_data(seed: u64, n: usize) -> (FeatureMatrix, Vec<u8>) {
        let mut r = rng::seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)]).collect();
        let y = rows.iter().map(|r| u8::from(r[0] > 0.5)).collect();
        let cols = vec![ColumnMeta::new("a", ""), ColumnMeta::new("b", "")];
        (FeatureMatrix::from_rows(cols, &rows).unwrap(), y)
    }

    #[test]
    fn single_feature_gets_everything() {
        let (x, y) = threshold_data(1, 100);
        let x = x.select_columns(&[0]);
        let r = rf_importance(&x, &y, &RfParams { n_trees: 10, ..Default::default() }).unwrap();
        assert_eq!(r.features[0].score, 1.0);
    }

    #[test]
    fn informative_feature_wins_and_scores_normalize() {
        let (x, y) = threshold_data(2, 200);
        let r = rf_importance(&x, &y, &RfParams { n_trees: 20, seed: 3, ..Default::default() }).unwrap();
        assert_eq!(r.features[0].name, "a");
        let sum: f64 = r.features.iter().map(|f| f.score).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(r.features.iter().all(|f| f.score >= 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let (x, y) = threshold_data(4, 150);
        let p = RfParams { n_trees: 15, seed: 9, ..Default::default() };
        assert_eq!(rf_importance(&x, &y, &p).unwrap(), rf_importance(&x, &y, &p).unwrap());
    }

    #[test]
    fn single_class_rejected() {
        let (x, _) = threshold_data(5, 20);
        assert!(matches!(rf_importance(&x, &[1; 20], &RfParams::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn top_k_tie_break() {
        let names: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let r = ImportanceRanking::from_scores(&names, &[0.25, 0.5, 0.25]);
        let all: Vec<String> = select_top_k(&r, 3).into_iter().map(|f| f.name).collect();
        assert_eq!(all, vec!["y", "x", "z"]);
        assert_eq!(select_top_k(&r, 1)[0].name, "y");
        let tie = ImportanceRanking::from_scores(&names, &[0.2, 0.4, 0.4]);
        assert_eq!(select_top_k(&tie, 1)[0].name, "y");
    }
}
