use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

/// Decision threshold for accuracy, sensitivity and specificity.
pub const THRESHOLD: f64 = 0.5;

/// Mann–Whitney AUC: probability that a random positive outscores a random
/// negative, ties counted ½. Returns 0.5 when either class is absent.
pub fn auc(scores: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Average ranks over tie groups, 1-based.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += avg_rank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    u / (n_pos as f64 * n_neg as f64)
}

/// Threshold metrics at [`THRESHOLD`] (score ≥ threshold predicts positive) plus AUC.
pub fn binary_metrics(scores: &[f64], labels: &[bool]) -> EvalMetrics {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= THRESHOLD, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    EvalMetrics {
        accuracy: ratio(tp + tn, scores.len()),
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        auc: auc(scores, labels),
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_classifier() {
        let labels = [true, false, true, false];
        let scores: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
        let m = binary_metrics(&scores, &labels);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.auc, 1.0);
    }

    #[test]
    fn four_pair_example() {
        let scores = [0.9, 0.4, 0.6, 0.1];
        let labels = [true, true, false, false];
        let m = binary_metrics(&scores, &labels);
        assert_eq!(m.sensitivity, 0.5);
        assert_eq!(m.specificity, 0.5);
        assert_eq!(m.auc, 0.75);
    }

    #[test]
    fn constant_score_is_half() {
        assert_eq!(auc(&[0.3; 6], &[true, false, true, false, false, true]), 0.5);
    }

    proptest! {
        #[test]
        fn rank_auc_matches_pairwise_enumeration(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 5.0).collect();
            let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            prop_assert!((auc(&scores, &labels) - brute_force_auc(&scores, &labels)).abs() < 1e-12);
        }
    }
}
