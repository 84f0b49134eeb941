//! Cross-validation, grid search and evaluation metrics.

pub mod cv;
pub mod grid;
pub mod metrics;

pub use cv::{kfold_splits, stratified_kfold};
pub use grid::{
    decode_params, default_grid, grid_search, tuning_curves, ConfigResult, CvResult, GridSearchOptions,
    GridSearchOutcome, ParamGrid, ParamSet, ParamValue, Scoring, TuningPoint,
};
pub use metrics::{auc, confusion, evaluate, metric_panel, ConfusionMatrix, EvaluationReport};
