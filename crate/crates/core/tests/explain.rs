//! Attribution rankings against models whose answer is known.

use rand::Rng;
use rand_distr::StandardNormal;

use glycopipe::explain::{mean_abs_attribution, AttributionRanking, Players, ShapleyMode};
use glycopipe::privacy::fit_logistic_regression;
use glycopipe::rng;

fn dataset(n: usize, weights: &[f64], seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut r = rng::seeded(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = weights.iter().map(|_| r.sample::<f64, _>(StandardNormal).clamp(-3.0, 3.0)).collect();
        let z: f64 = row.iter().zip(weights).map(|(a, b)| a * b).sum();
        y.push(u8::from(r.gen::<f64>() < 1.0 / (1.0 + (-z).exp())));
        x.push(row);
    }
    (x, y)
}

#[test]
fn logistic_ranking_follows_coefficients() {
    let weights = [0.2, -2.0, 1.0, 0.0, -0.6];
    let (x, y) = dataset(4000, &weights, 1);
    let model = fit_logistic_regression(&x, &y, 3.0 * (weights.len() as f64).sqrt(), 1e-4).unwrap();
    let logit = |v: &[f64]| model.logit(v);
    let background: Vec<Vec<f64>> = x[..64].to_vec();
    let rows: Vec<Vec<f64>> = x[64..264].to_vec();
    let scores = mean_abs_attribution(
        &logit,
        &rows,
        &background,
        &Players::singletons(weights.len()),
        ShapleyMode::Exact,
        0,
    )
    .unwrap();

    let names: Vec<String> = (0..weights.len()).map(|i| format!("f{i}")).collect();
    let ranking = AttributionRanking::from_scores(&names, &scores);
    let order: Vec<&str> = ranking.features.iter().map(|f| f.name.as_str()).collect();
    // Features share a distribution, so |coefficient| decides the order.
    assert_eq!(order, ["f1", "f2", "f4", "f0", "f3"]);

    // On the logit scale each mean |φᵢ| is |wᵢ| times the mean |xᵢ − E bᵢ|.
    for (i, s) in scores.iter().enumerate() {
        let mean_b = background.iter().map(|b| b[i]).sum::<f64>() / background.len() as f64;
        let spread = rows.iter().map(|r| (r[i] - mean_b).abs()).sum::<f64>() / rows.len() as f64;
        let coef = model.weights[i] / (model.data_norm * std::f64::consts::SQRT_2);
        assert!((s - coef.abs() * spread).abs() < 1e-9, "feature {i}: {s}");
    }
}

#[test]
fn sampled_ranking_agrees_with_exact() {
    let weights = [1.5, -0.2, 0.8];
    let (x, y) = dataset(1500, &weights, 2);
    let model = fit_logistic_regression(&x, &y, 3.0 * 3f64.sqrt(), 1e-3).unwrap();
    let prob = |v: &[f64]| model.predict_proba(v);
    let players = Players::singletons(3);
    let exact = mean_abs_attribution(&prob, &x[..50], &x[50..82], &players, ShapleyMode::Exact, 0).unwrap();
    let sampled =
        mean_abs_attribution(&prob, &x[..50], &x[50..82], &players, ShapleyMode::Sample { permutations: 400 }, 5)
            .unwrap();
    for (a, b) in exact.iter().zip(&sampled) {
        assert!((a - b).abs() < 0.01, "{a} vs {b}");
    }
}
