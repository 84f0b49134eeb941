//! The run report. It holds every stage output and no wall-clock data, so
//! equal configs and seeds give byte-identical files.

use serde::Serialize;
use tabkit_core::classify::{ModelKind, ScoreScale};
use tabkit_core::cluster::{ClusterMeans, KSelectionReport};
use tabkit_core::explain::ShapSummary;
use tabkit_core::modelsel::{EvaluationReport, ParamSet, TuningPoint};
use tabkit_core::pca::{LoadingTable, ScreePoint};
use tabkit_core::preprocess::EncodingMap;
use tabkit_core::tabular::{AuditReport, ColumnSummary};

use crate::config::RunConfig;
use crate::prepare::CapRule;

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub toolkit: &'static str,
    pub version: &'static str,
    pub seed: u64,
}

impl Environment {
    pub fn new(seed: u64) -> Self {
        Self {
            toolkit: "tabkit",
            version: tabkit_core::VERSION,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub environment: Environment,
    pub config: RunConfig,
    /// False when a stage failed; `failure` then says which.
    pub complete: bool,
    pub failure: Option<StageFailure>,
    pub warnings: Vec<String>,
    pub segmentation: Option<SegmentationReport>,
    pub prediction: Option<PredictionReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputSummary {
    pub rows_read: usize,
    /// Rows excluded for missing values in the used columns.
    pub rows_dropped: usize,
    pub audit: AuditReport,
    pub describe: Vec<ColumnSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PcaSummary {
    pub k_retained: usize,
    pub cumulative_variance: f64,
    pub scree: Vec<ScreePoint>,
    pub loadings: LoadingTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct KMeansSummary {
    pub k: usize,
    pub inertia: f64,
    pub silhouette: f64,
    pub sizes: Vec<usize>,
    pub n_iter: usize,
    pub converged: bool,
    pub restart: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SegmentationReport {
    pub input: Option<InputSummary>,
    pub encodings: Vec<EncodingMap>,
    pub caps: Vec<CapRule>,
    pub features: Vec<String>,
    pub pca: Option<PcaSummary>,
    pub k_selection: Option<KSelectionReport>,
    pub kmeans: Option<KMeansSummary>,
    pub cluster_means: Option<ClusterMeans>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelSummary {
    pub column: String,
    pub negative: String,
    pub positive: String,
    pub negatives: usize,
    pub positives: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitPart {
    pub rows: usize,
    pub positives: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitSummary {
    pub train: SplitPart,
    pub validation: SplitPart,
    pub test: SplitPart,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    pub kind: ModelKind,
    pub configurations: usize,
    pub failed_configurations: usize,
    /// Grid index and message of each failed configuration.
    pub errors: Vec<(usize, String)>,
    pub best_index: usize,
    pub best_params: ParamSet,
    pub cv_mean: f64,
    pub cv_std: f64,
    pub cv_fold_scores: Vec<f64>,
    pub validation: EvaluationReport,
    pub test: EvaluationReport,
    pub tuning_curve: Vec<TuningPoint>,
}

impl ModelReport {
    pub fn failure_warnings(&self) -> Vec<String> {
        self.errors
            .iter()
            .map(|(i, e)| format!("{} configuration {i} failed: {e}", self.kind))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapReport {
    pub model: ModelKind,
    pub scale: ScoreScale,
    pub summary: ShapSummary,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PredictionReport {
    pub input: Option<InputSummary>,
    pub label: Option<LabelSummary>,
    pub encodings: Vec<EncodingMap>,
    pub caps: Vec<CapRule>,
    pub features: Vec<String>,
    pub split: Option<SplitSummary>,
    pub models: Vec<ModelReport>,
    /// Chosen by validation accuracy, then cross-validation score, then
    /// model order.
    pub best_model: Option<ModelKind>,
    pub shap: Option<ShapReport>,
}
