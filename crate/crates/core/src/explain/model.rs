//! Attribution, robustness and attention views of a trained fusion model.

use std::io::Write;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::shapley::{shapley_exact_players, shapley_sample_players, Attribution, Players};
use crate::error::{invalid, Error, Result};
use crate::model::{FusionModel, Mode, Sample};
use crate::rng;

pub const BACKGROUND_SIZE: usize = 32;
pub const SERIES_PLAYER: &str = "glucose_series";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ShapleyMode {
    Exact,
    Sample { permutations: usize },
}

/// Up to `size` rows drawn without replacement with a fixed seed.
pub fn select_background(data: &[Sample], size: usize, seed: u64) -> Vec<Sample> {
    let k = size.min(data.len());
    let mut idx = sample(&mut rng::stream(seed, 0x4247), data.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| data[i].clone()).collect()
}

/// Flattens a sample to `statics ‖ series`; each static feature is one
/// player and the whole series is one more.
struct Layout {
    static_dim: usize,
    series_len: usize,
}

impl Layout {
    fn of(model: &FusionModel, reference: &Sample) -> Result<Self> {
        if reference.statics.len() != model.static_dim {
            return Err(Error::Shape(format!(
                "sample has {} static features, model expects {}",
                reference.statics.len(),
                model.static_dim
            )));
        }
        Ok(Layout { static_dim: model.static_dim, series_len: reference.series.len() })
    }

    fn flatten(&self, s: &Sample) -> Result<Vec<f64>> {
        if s.statics.len() != self.static_dim || s.series.len() != self.series_len {
            return Err(Error::Shape("samples disagree in shape".into()));
        }
        Ok(s.statics.iter().chain(&s.series).copied().collect())
    }

    fn players(&self) -> Players {
        let mut groups: Vec<Vec<usize>> = (0..self.static_dim).map(|i| vec![i]).collect();
        if self.series_len > 0 {
            groups.push((self.static_dim..self.static_dim + self.series_len).collect());
        }
        Players::groups(groups, self.static_dim + self.series_len).expect("disjoint by construction")
    }

    fn predictor<'a>(&self, model: &'a FusionModel) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
        let k = self.static_dim;
        move |v: &[f64]| model.predict(&v[..k], &v[k..]).unwrap_or(f64::NAN)
    }
}

/// Player names: the static feature names followed by the series player.
pub fn player_names(static_names: &[String], has_series: bool) -> Vec<String> {
    let mut names = static_names.to_vec();
    if has_series {
        names.push(SERIES_PLAYER.to_string());
    }
    names
}

pub fn explain_sample(
    model: &FusionModel,
    row: &Sample,
    background: &[Sample],
    mode: ShapleyMode,
    seed: u64,
) -> Result<Attribution> {
    let layout = Layout::of(model, row)?;
    let x = layout.flatten(row)?;
    let bg: Vec<Vec<f64>> = background.iter().map(|b| layout.flatten(b)).collect::<Result<_>>()?;
    let f = layout.predictor(model);
    let players = layout.players();
    match mode {
        ShapleyMode::Exact => shapley_exact_players(&f, &x, &bg, &players),
        ShapleyMode::Sample { permutations } => shapley_sample_players(&f, &x, &bg, &players, permutations, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionScore {
    pub name: String,
    pub mean_abs: f64,
}

/// Features ordered by mean `|φ|`; scores are not normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRanking {
    pub features: Vec<AttributionScore>,
}

impl AttributionRanking {
    pub fn from_scores(names: &[String], scores: &[f64]) -> Self {
        let mut features: Vec<AttributionScore> = names
            .iter()
            .zip(scores)
            .map(|(n, &s)| AttributionScore { name: n.clone(), mean_abs: s })
            .collect();
        // Stable sort keeps input order among ties.
        features.sort_by(|a, b| b.mean_abs.total_cmp(&a.mean_abs));
        AttributionRanking { features }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "feature", "mean_abs_phi"])?;
        for (i, f) in self.features.iter().enumerate() {
            w.write_record([(i + 1).to_string(), f.name.clone(), f.mean_abs.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean `|φ_i|` over `rows` for an arbitrary predictor.
pub fn mean_abs_attribution(
    predict: &(dyn Fn(&[f64]) -> f64 + Sync),
    rows: &[Vec<f64>],
    background: &[Vec<f64>],
    players: &Players,
    mode: ShapleyMode,
    seed: u64,
) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut acc = vec![0.0; players.len()];
    for (r, x) in rows.iter().enumerate() {
        let a = match mode {
            ShapleyMode::Exact => shapley_exact_players(predict, x, background, players)?,
            ShapleyMode::Sample { permutations } => {
                shapley_sample_players(predict, x, background, players, permutations, rng::derive(seed, &r.to_string()))?
            }
        };
        for (s, v) in acc.iter_mut().zip(&a.values) {
            *s += v.abs();
        }
    }
    acc.iter_mut().for_each(|s| *s /= rows.len() as f64);
    Ok(acc)
}

pub fn model_importance(
    model: &FusionModel,
    data: &[Sample],
    background: &[Sample],
    static_names: &[String],
    mode: ShapleyMode,
    seed: u64,
) -> Result<AttributionRanking> {
    let first = data.first().ok_or(Error::EmptyInput)?;
    let layout = Layout::of(model, first)?;
    if static_names.len() != layout.static_dim {
        return Err(invalid(format!("{} names for {} static features", static_names.len(), layout.static_dim)));
    }
    let rows: Vec<Vec<f64>> = data.iter().map(|s| layout.flatten(s)).collect::<Result<_>>()?;
    let bg: Vec<Vec<f64>> = background.iter().map(|s| layout.flatten(s)).collect::<Result<_>>()?;
    let f = layout.predictor(model);
    let scores = mean_abs_attribution(&f, &rows, &bg, &layout.players(), mode, seed)?;
    Ok(AttributionRanking::from_scores(&player_names(static_names, layout.series_len > 0), &scores))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub epsilon: f64,
    pub samples: usize,
    pub unchanged: usize,
    pub unchanged_fraction: f64,
}

/// Perturbs every input by `ε · sign(∇ₓ loss)` and counts rows whose
/// predicted class (probability ≥ 0.5) is unchanged.
pub fn fgsm_robustness(model: &FusionModel, data: &[Sample], epsilon: f64) -> Result<RobustnessReport> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(invalid("epsilon must be non-negative and finite"));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut unchanged = 0;
    for s in data {
        let before = model.predict(&s.statics, &s.series)? >= 0.5;
        let g = model.input_gradient(&s.statics, &s.series, s.label as f64)?;
        let step = |v: &[f64], g: &[f64]| -> Vec<f64> {
            v.iter().zip(g).map(|(v, g)| v + epsilon * sign(*g)).collect()
        };
        let after = model.predict(&step(&s.statics, &g.statics), &step(&s.series, &g.series))? >= 0.5;
        unchanged += usize::from(before == after);
    }
    Ok(RobustnessReport {
        epsilon,
        samples: data.len(),
        unchanged,
        unchanged_fraction: unchanged as f64 / data.len() as f64,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Attention weights, one row per record and one column per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapExport {
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl HeatmapExport {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["record".to_string()];
        header.extend(self.column_labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.row_labels.iter().zip(&self.values) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn export_heatmap(model: &FusionModel, records: &[(String, &Sample)]) -> Result<HeatmapExport> {
    let t = records.first().map_or(0, |(_, s)| s.series.len());
    let mut values = Vec::with_capacity(records.len());
    for (id, s) in records {
        if s.series.len() != t {
            return Err(Error::Shape(format!("record {id} has {} days, expected {t}", s.series.len())));
        }
        values.push(model.forward(&s.statics, &s.series, Mode::Eval)?.attention_weights().to_vec());
    }
    Ok(HeatmapExport {
        row_labels: records.iter().map(|(id, _)| id.clone()).collect(),
        column_labels: (1..=t).map(|d| format!("day-{d}")).collect(),
        values,
    })
}
