//! Score prediction: the Bayesian hierarchy, the LASSO comparator, the
//! last-score carry-forward baseline, and pooled metrics.

pub mod design;
pub mod hblr;
pub mod lasso;
pub mod metrics;

pub use design::{FeatureSubset, PredictionDesign, PredictionRow, Standardizer, BASE_PREDICTORS};
pub use hblr::{
    fit_hblr, predict_hblr, HblrPrediction, PosteriorSamples, PredictOptions, Priors,
    SamplerConfig,
};
pub use lasso::{fit_lasso, fit_lasso_cv, lambda_grid, lambda_max, LassoFit, LassoModel};
pub use metrics::{evaluate, MetricsReport};

/// Carry-forward predictions: each row predicted by its last observed score.
pub fn predict_last_score(design: &PredictionDesign) -> Vec<f64> {
    design.rows.iter().map(|r| r.last_score).collect()
}
