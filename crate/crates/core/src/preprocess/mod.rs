//! Imputation, standardization, PCA and random-forest feature ranking.

mod forest;
mod impute;
mod matrix;
mod pca;
mod scale;
mod state;

pub use forest::{rf_importance, select_top_k, ImportanceRanking, RankedFeature, RfParams};
pub use impute::{apply_imputer, fit_imputer, ImputerModel};
pub use matrix::{ColumnMeta, FeatureMatrix};
pub use pca::{apply_pca, covariance, fix_sign, fit_pca, PcaModel};
pub use scale::{apply_scaler, fit_scaler, standardize_by_source, PooledScaler, ScalerModel};
pub use state::{
    samples_from_records, train_test_split, CleaningState, FeatureState, PreprocessConfig, PreprocessState,
    PREPROCESS_KIND,
};
