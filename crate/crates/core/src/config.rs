//! The single TOML document that configures a full run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::CohortSpec;
use crate::error::{Error, Result};
use crate::hyperopt::{SchedulerConfig, SearchSpace, TuneConfig};
use crate::model::{DpSgdSettings, OptimizerKind, TrainConfig};
use crate::preprocess::{PreprocessConfig, RfParams};
use crate::privacy::DpParams;
use crate::serve::{CacheConfig, ScalingPolicy, StagePolicy, WorkloadSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct TuningSection {
    pub scheduler: SchedulerConfig,
    pub search: TuneConfig,
    pub space: SearchSpace,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacySection {
    /// Enables DP-SGD in model training when set.
    pub dpsgd: Option<DpSgdSettings>,
    /// Accounting parameters reported alongside DP-SGD.
    pub accounting: DpParams,
    pub key_bits: u64,
}

impl Default for PrivacySection {
    fn default() -> Self {
        PrivacySection { dpsgd: None, accounting: DpParams::default(), key_bits: crate::privacy::DEFAULT_KEY_BITS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub test_fraction: f64,
    pub cohort: CohortSpec,
    pub preprocessing: PreprocessConfig,
    pub model: TrainConfig,
    pub privacy: PrivacySection,
    pub tuning: TuningSection,
    pub orchestration: StagePolicy,
    pub cache: CacheConfig,
    pub scaling: ScalingPolicy,
    pub workload: WorkloadSpec,
}

impl Default for PipelineConfig {
    /// Sized for a desk-scale end-to-end run on 10⁴ patients.
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            test_fraction: 0.2,
            cohort: CohortSpec { n: 10_000, ..Default::default() },
            preprocessing: PreprocessConfig {
                pca_k: 3,
                select_k: None,
                forest: RfParams { n_trees: 50, ..Default::default() },
            },
            model: TrainConfig {
                learning_rate: 0.005,
                batch_size: 64,
                epochs: 12,
                lstm_layers: 1,
                hidden_size: 16,
                mlp_hidden: vec![16],
                dropout_rate: 0.1,
                optimizer: OptimizerKind::Adam,
                patience: Some(3),
                ..Default::default()
            },
            privacy: PrivacySection::default(),
            tuning: TuningSection::default(),
            orchestration: StagePolicy::default(),
            cache: CacheConfig::default(),
            scaling: ScalingPolicy::default(),
            workload: WorkloadSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Training settings with the global seed and privacy section applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            dp: self.privacy.dpsgd.or(self.model.dp),
            ..self.model.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config(format!("test_fraction {} outside [0, 1)", self.test_fraction)));
        }
        self.cohort.validate().map_err(wrap)?;
        self.model.validate().map_err(wrap)?;
        self.tuning.scheduler.validate().map_err(wrap)?;
        self.tuning.space.validate().map_err(wrap)?;
        self.orchestration.validate().map_err(wrap)?;
        self.scaling.validate().map_err(wrap)?;
        self.workload.validate().map_err(wrap)?;
        Ok(())
    }
}
