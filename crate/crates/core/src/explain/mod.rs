//! Shapley attributions, gradient-sign robustness and attention heatmaps.

mod model;
mod shapley;

pub use model::{
    explain_sample, export_heatmap, fgsm_robustness, mean_abs_attribution, model_importance, player_names,
    select_background, AttributionRanking, AttributionScore, HeatmapExport, RobustnessReport, ShapleyMode,
    BACKGROUND_SIZE, SERIES_PLAYER,
};
pub use shapley::{
    shapley_exact, shapley_exact_players, shapley_sample, shapley_sample_players, Attribution, Players,
    MAX_EXACT_PLAYERS,
};
