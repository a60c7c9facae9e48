//! Fitted preprocessing applied to record sets.
//!
//! Cleaning imputes and standardizes the static features (per column) and the
//! glucose series (one pooled scale, so day-to-day drift is preserved).
//! Feature engineering ranks the cleaned statics by forest importance, keeps
//! the top `select_k`, and appends `pca_k` principal-component scores computed
//! on the kept subset.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    apply_imputer, apply_pca, apply_scaler, fit_imputer, fit_pca, fit_scaler, rf_importance, select_top_k, FeatureMatrix,
    ImportanceRanking, ImputerModel, PcaModel, PooledScaler, RankedFeature, RfParams, ScalerModel,
};
use crate::checkpoint::{Checkpoint, Entry, EntryData};
use crate::data::{PatientRecord, RecordSet};
use crate::error::{invalid, Error, Result};
use crate::model::Sample;

pub const PREPROCESS_KIND: &str = "preprocess_state";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub pca_k: usize,
    /// Statics kept after ranking; `None` keeps all of them.
    pub select_k: Option<usize>,
    pub forest: RfParams,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { pca_k: 3, select_k: None, forest: RfParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningState {
    pub static_names: Vec<String>,
    pub imputer: ImputerModel,
    pub scaler: ScalerModel,
    pub series_imputer: ImputerModel,
    pub series_scaler: PooledScaler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureState {
    pub input_names: Vec<String>,
    pub ranking: ImportanceRanking,
    pub selected: Vec<RankedFeature>,
    pub pca: Option<PcaModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessState {
    pub cleaning: CleaningState,
    pub features: FeatureState,
}

fn rebuild(set: &RecordSet, names: Vec<String>, statics: &FeatureMatrix, series: Option<&FeatureMatrix>) -> RecordSet {
    let records = set
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| PatientRecord {
            patient_id: r.patient_id.clone(),
            statics: statics.row(i).to_vec(),
            static_mask: vec![true; statics.d],
            glucose_series: series.map_or_else(|| r.glucose_series.clone(), |s| s.row(i).to_vec()),
            series_mask: series.map_or_else(|| r.series_mask.clone(), |s| vec![true; s.d]),
            label: r.label,
        })
        .collect();
    RecordSet { static_names: names, series_len: set.series_len, records }
}

impl CleaningState {
    pub fn fit(train: &RecordSet) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput);
        }
        let statics = FeatureMatrix::from_statics(train)?;
        let imputer = fit_imputer(&statics)?;
        let scaler = fit_scaler(&apply_imputer(&imputer, &statics)?)?;
        let series = FeatureMatrix::from_series(train)?;
        let series_imputer = fit_imputer(&series)?;
        let series_scaler = PooledScaler::fit(&apply_imputer(&series_imputer, &series)?)?;
        Ok(CleaningState { static_names: train.static_names.clone(), imputer, scaler, series_imputer, series_scaler })
    }

    pub fn transform(&self, set: &RecordSet) -> Result<RecordSet> {
        if set.static_names != self.static_names {
            return Err(Error::Shape(format!(
                "fitted on statics {:?}, got {:?}",
                self.static_names, set.static_names
            )));
        }
        if set.series_len != self.series_imputer.means.len() {
            return Err(Error::Shape(format!(
                "fitted on series length {}, got {}",
                self.series_imputer.means.len(),
                set.series_len
            )));
        }
        let statics = apply_scaler(&self.scaler, &apply_imputer(&self.imputer, &FeatureMatrix::from_statics(set)?)?)?;
        let mut series = apply_imputer(&self.series_imputer, &FeatureMatrix::from_series(set)?)?;
        series.values.iter_mut().for_each(|v| *v = self.series_scaler.apply(*v));
        Ok(rebuild(set, self.static_names.clone(), &statics, Some(&series)))
    }
}

impl FeatureState {
    /// Fits on cleaned, labelled records.
    pub fn fit(cleaned: &RecordSet, config: &PreprocessConfig) -> Result<Self> {
        let x = FeatureMatrix::from_statics(cleaned)?;
        let y = cleaned.labels()?;
        let ranking = rf_importance(&x, &y, &config.forest)?;
        let k = config.select_k.unwrap_or(x.d);
        if k == 0 || k > x.d {
            return Err(invalid(format!("select_k = {k} outside 1..={}", x.d)));
        }
        let selected = select_top_k(&ranking, k);
        let pca = if config.pca_k == 0 {
            None
        } else {
            let cols: Vec<usize> = selected.iter().map(|f| f.column).collect();
            Some(fit_pca(&x.select_columns(&cols), config.pca_k.min(k))?)
        };
        Ok(FeatureState { input_names: x.column_names(), ranking, selected, pca })
    }

    pub fn output_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.selected.iter().map(|f| f.name.clone()).collect();
        if let Some(p) = &self.pca {
            names.extend((1..=p.components.len()).map(|j| format!("pc_{j}")));
        }
        names
    }

    pub fn transform(&self, cleaned: &RecordSet) -> Result<RecordSet> {
        if cleaned.static_names != self.input_names {
            return Err(Error::Shape(format!(
                "fitted on statics {:?}, got {:?}",
                self.input_names, cleaned.static_names
            )));
        }
        let x = FeatureMatrix::from_statics(cleaned)?;
        let cols: Vec<usize> = self.selected.iter().map(|f| f.column).collect();
        let kept = x.select_columns(&cols);
        let out = match &self.pca {
            Some(p) => kept.hconcat(&apply_pca(p, &kept)?)?,
            None => kept,
        };
        Ok(rebuild(cleaned, self.output_names(), &out, None))
    }
}

impl PreprocessState {
    pub fn fit(train: &RecordSet, config: &PreprocessConfig) -> Result<Self> {
        let cleaning = CleaningState::fit(train)?;
        let features = FeatureState::fit(&cleaning.transform(train)?, config)?;
        Ok(PreprocessState { cleaning, features })
    }

    pub fn transform(&self, set: &RecordSet) -> Result<RecordSet> {
        self.features.transform(&self.cleaning.transform(set)?)
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let f = |name: &str, v: &[f64]| Entry {
            name: name.to_string(),
            shape: vec![v.len() as u64],
            data: EntryData::F64(v.to_vec()),
        };
        let c = &self.cleaning;
        let mut entries = vec![
            f("imputer.means", &c.imputer.means),
            f("scaler.means", &c.scaler.means),
            f("scaler.stds", &c.scaler.stds),
            f("series_imputer.means", &c.series_imputer.means),
            f("series_scaler", &[c.series_scaler.mean, c.series_scaler.std]),
        ];
        if let Some(p) = &self.features.pca {
            let d = p.mean.len() as u64;
            entries.push(f("pca.mean", &p.mean));
            entries.push(Entry {
                name: "pca.components".into(),
                shape: vec![p.components.len() as u64, d],
                data: EntryData::F64(p.components.concat()),
            });
            entries.push(f("pca.explained_variance", &p.explained_variance));
        }
        let document = json!({
            "kind": PREPROCESS_KIND,
            "static_names": c.static_names,
            "series_len": c.series_imputer.means.len(),
            "ranking": self.features.ranking,
            "selected": self.features.selected,
        })
        .to_string();
        Ok(Checkpoint { entries, document })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind()? != PREPROCESS_KIND {
            return Err(Error::Format(format!("expected a {PREPROCESS_KIND} checkpoint")));
        }
        #[derive(Deserialize)]
        struct Doc {
            static_names: Vec<String>,
            series_len: usize,
            ranking: ImportanceRanking,
            selected: Vec<RankedFeature>,
        }
        let doc: Doc = serde_json::from_str(&ck.document)?;
        let floats = |name: &str| -> Result<Vec<f64>> {
            match &ck.get(name)?.data {
                EntryData::F64(v) => Ok(v.clone()),
                _ => Err(Error::Format(format!("entry `{name}` is not f64"))),
            }
        };
        let series = floats("series_scaler")?;
        if series.len() != 2 {
            return Err(Error::Format("series_scaler needs two values".into()));
        }
        let series_names: Vec<String> = (1..=doc.series_len).map(crate::data::series_column).collect();
        let cleaning = CleaningState {
            imputer: ImputerModel { columns: doc.static_names.clone(), means: floats("imputer.means")? },
            scaler: ScalerModel { means: floats("scaler.means")?, stds: floats("scaler.stds")? },
            series_imputer: ImputerModel { columns: series_names, means: floats("series_imputer.means")? },
            series_scaler: PooledScaler { mean: series[0], std: series[1] },
            static_names: doc.static_names.clone(),
        };
        let pca = if ck.get("pca.mean").is_ok() {
            let mean = floats("pca.mean")?;
            let flat = floats("pca.components")?;
            let d = mean.len().max(1);
            Some(PcaModel {
                components: flat.chunks(d).map(<[f64]>::to_vec).collect(),
                mean,
                explained_variance: floats("pca.explained_variance")?,
            })
        } else {
            None
        };
        Ok(PreprocessState {
            cleaning,
            features: FeatureState { input_names: doc.static_names, ranking: doc.ranking, selected: doc.selected, pca },
        })
    }
}

/// Model-ready samples from complete, labelled records.
pub fn samples_from_records(set: &RecordSet) -> Result<Vec<Sample>> {
    set.records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.static_mask.iter().chain(&r.series_mask).any(|m| !m) {
                return Err(Error::MissingCells("model input"));
            }
            let label = r.label.ok_or_else(|| invalid(format!("record {} (row {}) has no label", r.patient_id, i + 1)))?;
            Ok(Sample { statics: r.statics.clone(), series: r.glucose_series.clone(), label })
        })
        .collect()
}

/// Seeded shuffle of `0..n` split into `(train, test)` index lists, each sorted.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut crate::rng::stream(seed, 0x5350_4c54));
    let n_test = ((n as f64) * test_fraction.clamp(0.0, 1.0)).round() as usize;
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_cohort, to_records, CohortSpec, Schema};

    fn cohort(n: usize) -> RecordSet {
        let spec = CohortSpec { n, seed: 12, ..Default::default() };
        to_records(&generate_cohort(&spec).unwrap(), &Schema::default()).unwrap()
    }

    fn config() -> PreprocessConfig {
        PreprocessConfig {
            pca_k: 2,
            select_k: Some(4),
            forest: RfParams { n_trees: 10, ..Default::default() },
        }
    }

    #[test]
    fn output_layout() {
        let set = cohort(300);
        let state = PreprocessState::fit(&set, &config()).unwrap();
        let out = state.transform(&set).unwrap();
        assert_eq!(out.static_names.len(), 6);
        assert_eq!(&out.static_names[4..], &["pc_1".to_string(), "pc_2".to_string()]);
        assert!(out.records.iter().all(|r| r.static_mask.iter().chain(&r.series_mask).all(|&m| m)));
        assert_eq!(samples_from_records(&out).unwrap().len(), 300);
    }

    #[test]
    fn informative_features_are_kept() {
        let set = cohort(1500);
        let state = PreprocessState::fit(&set, &config()).unwrap();
        let kept: Vec<&str> = state.features.selected.iter().map(|f| f.name.as_str()).collect();
        assert!(kept.contains(&"fasting_glucose"), "{kept:?}");
        assert!(!kept.iter().any(|n| n.starts_with("noise_")), "{kept:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let set = cohort(200);
        let state = PreprocessState::fit(&set, &config()).unwrap();
        let bytes = state.to_checkpoint().unwrap().to_bytes().unwrap();
        let back = PreprocessState::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn split_partitions_rows() {
        let (train, test) = train_test_split(100, 0.2, 3);
        assert_eq!((train.len(), test.len()), (80, 20));
        let mut all = [train, test].concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}
