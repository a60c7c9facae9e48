//! Interventional Shapley values: off-coalition features take their values
//! from background rows, and `v(S)` is the mean prediction over the background.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Largest player count accepted by exact enumeration.
pub const MAX_EXACT_PLAYERS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// Mean prediction over the background.
    pub base_value: f64,
    /// Prediction at the explained row.
    pub prediction: f64,
    pub values: Vec<f64>,
    /// Standard errors of the sampled estimates; `None` for exact values.
    pub std_errors: Option<Vec<f64>>,
    /// Permutations drawn, or `0` for exact enumeration.
    pub samples: usize,
}

impl Attribution {
    pub fn write_csv(&self, names: &[String], out: impl Write) -> Result<()> {
        if names.len() != self.values.len() {
            return Err(Error::Shape(format!("{} names for {} values", names.len(), self.values.len())));
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "phi", "std_error"])?;
        for (i, name) in names.iter().enumerate() {
            let se = self.std_errors.as_ref().map_or(String::new(), |s| s[i].to_string());
            w.write_record([name.clone(), self.values[i].to_string(), se])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Partition of input coordinates into players. Singletons by default; a
/// group lets a whole block (such as a time series) act as one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Players(Vec<Vec<usize>>);

impl Players {
    pub fn singletons(d: usize) -> Self {
        Players((0..d).map(|i| vec![i]).collect())
    }

    pub fn groups(groups: Vec<Vec<usize>>, d: usize) -> Result<Self> {
        let mut seen = vec![false; d];
        for &i in groups.iter().flatten() {
            if i >= d || seen[i] {
                return Err(invalid(format!("coordinate {i} is out of range or repeated")));
            }
            seen[i] = true;
        }
        Ok(Players(groups))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check(x: &[f64], background: &[Vec<f64>]) -> Result<()> {
    if background.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(b) = background.iter().find(|b| b.len() != x.len()) {
        return Err(Error::Shape(format!("background row has {} features, expected {}", b.len(), x.len())));
    }
    Ok(())
}

fn mean_prediction(predict: &dyn Fn(&[f64]) -> f64, rows: &[Vec<f64>]) -> f64 {
    rows.iter().map(|r| predict(r)).sum::<f64>() / rows.len() as f64
}

pub fn shapley_exact(predict: &dyn Fn(&[f64]) -> f64, x: &[f64], background: &[Vec<f64>]) -> Result<Attribution> {
    shapley_exact_players(predict, x, background, &Players::singletons(x.len()))
}

/// Enumerates all `2^d` coalitions of the players.
pub fn shapley_exact_players(
    predict: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    background: &[Vec<f64>],
    players: &Players,
) -> Result<Attribution> {
    check(x, background)?;
    let d = players.len();
    if d > MAX_EXACT_PLAYERS {
        return Err(invalid(format!(
            "exact Shapley values support at most {MAX_EXACT_PLAYERS} features, got {d}; use sampling mode"
        )));
    }
    let mut values = vec![0.0; 1 << d];
    let mut composite = background.to_vec();
    for (mask, v) in values.iter_mut().enumerate() {
        for (row, b) in composite.iter_mut().zip(background) {
            for (p, group) in players.0.iter().enumerate() {
                let src = if mask >> p & 1 == 1 { x } else { b.as_slice() };
                for &i in group {
                    row[i] = src[i];
                }
            }
        }
        *v = mean_prediction(predict, &composite);
    }
    // w(s) = s! (d − s − 1)! / d!
    let mut fact = vec![1.0f64; d + 1];
    for k in 1..=d {
        fact[k] = fact[k - 1] * k as f64;
    }
    let weight = |s: usize| fact[s] * fact[d - s - 1] / fact[d];
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1 << i;
        for mask in 0..1usize << d {
            if mask & bit == 0 {
                *p += weight(mask.count_ones() as usize) * (values[mask | bit] - values[mask]);
            }
        }
    }
    Ok(Attribution {
        base_value: values[0],
        prediction: predict(x),
        values: phi,
        std_errors: None,
        samples: 0,
    })
}

pub fn shapley_sample(
    predict: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    background: &[Vec<f64>],
    n_permutations: usize,
    seed: u64,
) -> Result<Attribution> {
    shapley_sample_players(predict, x, background, &Players::singletons(x.len()), n_permutations, seed)
}

/// Permutation sampling. Permutation `k` is drawn from its own stream
/// `(seed, k)`, so results do not depend on how work is split across threads.
pub fn shapley_sample_players(
    predict: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    background: &[Vec<f64>],
    players: &Players,
    n_permutations: usize,
    seed: u64,
) -> Result<Attribution> {
    check(x, background)?;
    if n_permutations == 0 {
        return Err(invalid("n_permutations must be positive"));
    }
    let d = players.len();
    let base_value = mean_prediction(predict, background);
    let prediction = predict(x);

    let one = |k: usize| -> Vec<f64> {
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut rng::stream(seed, k as u64));
        let mut composite = background.to_vec();
        let mut prev = base_value;
        let mut contrib = vec![0.0; d];
        for &p in &order {
            for row in composite.iter_mut() {
                for &i in &players.0[p] {
                    row[i] = x[i];
                }
            }
            let v = mean_prediction(predict, &composite);
            contrib[p] = v - prev;
            prev = v;
        }
        contrib
    };

    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(n_permutations);
    let chunk = n_permutations.div_ceil(threads);
    let per_perm: Vec<Vec<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let one = &one;
                s.spawn(move || (t * chunk..((t + 1) * chunk).min(n_permutations)).map(one).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sampling worker panicked")).collect()
    });

    let n = n_permutations as f64;
    let mut mean = vec![0.0; d];
    for c in &per_perm {
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let std_errors = (0..d)
        .map(|i| {
            if n_permutations < 2 {
                return f64::NAN;
            }
            let ss: f64 = per_perm.iter().map(|c| (c[i] - mean[i]).powi(2)).sum();
            (ss / (n - 1.0) / n).sqrt()
        })
        .collect();
    Ok(Attribution {
        base_value,
        prediction,
        values: mean,
        std_errors: Some(std_errors),
        samples: n_permutations,
    })
}
