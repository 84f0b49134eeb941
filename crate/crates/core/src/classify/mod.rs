//! Five binary classifiers behind one contract: `fit(x, y, params)`,
//! `predict(row) -> {0, 1}` and `score(row) -> f64`, a ranking score whose
//! threshold reproduces `predict`.
//!
//! Labels are `u8` in `{0, 1}`; 1 is the positive class.

pub mod forest;
pub mod knn;
pub mod logreg;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use forest::{ForestModel, ForestParams};
pub use knn::{KnnModel, KnnParams, Metric, Weighting};
pub use logreg::{LogRegModel, LogRegParams, Penalty};
pub use svm::{GammaRule, SvmModel, SvmParams};
pub use tree::{ClassWeight, Criterion, MaxFeatures, Splitter, TreeModel, TreeParams};

/// Version of the model JSON layout written by [`ModelEnvelope`].
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub(crate) fn check_training_data(x: &Matrix, y: &[u8]) -> Result<[usize; 2]> {
    if x.rows() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch {
            expected: x.rows(),
            found: y.len(),
        });
    }
    let mut counts = [0usize; 2];
    for &v in y {
        if v > 1 {
            return Err(Error::InvalidParameter(format!("label {v} is not 0 or 1")));
        }
        counts[v as usize] += 1;
    }
    Ok(counts)
}

pub(crate) fn check_row(expected: usize, row: &[f64]) -> Result<()> {
    if row.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: row.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logreg,
    Tree,
    Forest,
    Knn,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Logreg,
        ModelKind::Tree,
        ModelKind::Forest,
        ModelKind::Knn,
        ModelKind::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::Knn => "knn",
            ModelKind::Svm => "svm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model kind {s:?}")))
    }
}

/// Hyperparameters for any of the five model kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ModelParams {
    Logreg(LogRegParams),
    Tree(TreeParams),
    Forest(ForestParams),
    Knn(KnnParams),
    Svm(SvmParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Logreg(_) => ModelKind::Logreg,
            ModelParams::Tree(_) => ModelKind::Tree,
            ModelParams::Forest(_) => ModelKind::Forest,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::Svm(_) => ModelKind::Svm,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Logreg => ModelParams::Logreg(LogRegParams::default()),
            ModelKind::Tree => ModelParams::Tree(TreeParams::default()),
            ModelKind::Forest => ModelParams::Forest(ForestParams::default()),
            ModelKind::Knn => ModelParams::Knn(KnnParams::default()),
            ModelKind::Svm => ModelParams::Svm(SvmParams::default()),
        }
    }
}

/// Output of fitting: the model plus any non-fatal diagnostics.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: TrainedClassifier,
    pub warnings: Vec<String>,
}

pub fn fit(params: &ModelParams, x: &Matrix, y: &[u8]) -> Result<Fitted> {
    let mut warnings = Vec::new();
    let model = match params {
        ModelParams::Logreg(p) => {
            let m = logreg::logreg_fit(x, y, p)?;
            if !m.converged {
                warnings.push(format!(
                    "logistic regression stopped after {} iterations without reaching tol",
                    m.n_iter
                ));
            }
            TrainedClassifier::Logreg(m)
        }
        ModelParams::Tree(p) => TrainedClassifier::Tree(tree::tree_fit(x, y, p)?),
        ModelParams::Forest(p) => TrainedClassifier::Forest(forest::forest_fit(x, y, p)?),
        ModelParams::Knn(p) => TrainedClassifier::Knn(knn::knn_fit(x, y, p)?),
        ModelParams::Svm(p) => {
            let m = svm::svm_fit(x, y, p)?;
            if !m.converged {
                warnings.push(format!("SMO stopped after {} iterations without reaching tol", m.n_iter));
            }
            TrainedClassifier::Svm(m)
        }
    };
    Ok(Fitted { model, warnings })
}

/// Which quantity [`TrainedClassifier::score`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreScale {
    Probability,
    LogOdds,
    PositiveFraction,
    DecisionValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum TrainedClassifier {
    Logreg(LogRegModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Knn(KnnModel),
    Svm(SvmModel),
}

impl TrainedClassifier {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedClassifier::Logreg(_) => ModelKind::Logreg,
            TrainedClassifier::Tree(_) => ModelKind::Tree,
            TrainedClassifier::Forest(_) => ModelKind::Forest,
            TrainedClassifier::Knn(_) => ModelKind::Knn,
            TrainedClassifier::Svm(_) => ModelKind::Svm,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedClassifier::Logreg(m) => m.weights.len(),
            TrainedClassifier::Tree(m) => m.n_features,
            TrainedClassifier::Forest(m) => m.n_features,
            TrainedClassifier::Knn(m) => m.x.cols(),
            TrainedClassifier::Svm(m) => m.support_vectors.cols(),
        }
    }

    /// Ranking score: probability (logistic), positive leaf or vote fraction
    /// (tree, forest), weighted neighbour fraction (kNN), signed decision
    /// value (SVM).
    pub fn score(&self, row: &[f64]) -> Result<f64> {
        check_row(self.n_features(), row)?;
        Ok(match self {
            TrainedClassifier::Logreg(m) => m.predict_proba_unchecked(row),
            TrainedClassifier::Tree(m) => m.score_unchecked(row),
            TrainedClassifier::Forest(m) => m.score_unchecked(row),
            TrainedClassifier::Knn(m) => m.score_unchecked(row),
            TrainedClassifier::Svm(m) => m.decision_unchecked(row),
        })
    }

    pub fn score_scale(&self) -> ScoreScale {
        match self {
            TrainedClassifier::Logreg(_) => ScoreScale::Probability,
            TrainedClassifier::Tree(_) | TrainedClassifier::Forest(_) | TrainedClassifier::Knn(_) => {
                ScoreScale::PositiveFraction
            }
            TrainedClassifier::Svm(_) => ScoreScale::DecisionValue,
        }
    }

    /// Score value at which `predict` switches class.
    pub fn threshold(&self) -> f64 {
        match self {
            TrainedClassifier::Svm(_) => 0.0,
            _ => 0.5,
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<u8> {
        check_row(self.n_features(), row)?;
        Ok(match self {
            TrainedClassifier::Logreg(m) => m.predict_unchecked(row),
            TrainedClassifier::Tree(m) => m.predict_unchecked(row),
            TrainedClassifier::Forest(m) => m.predict_unchecked(row),
            TrainedClassifier::Knn(m) => m.predict_unchecked(row),
            TrainedClassifier::Svm(m) => u8::from(m.decision_unchecked(row) > 0.0),
        })
    }

    /// Additive-scale output used for attribution: log-odds for logistic
    /// regression, the ranking score otherwise.
    pub fn explain_output(&self, row: &[f64]) -> Result<(f64, ScoreScale)> {
        match self {
            TrainedClassifier::Logreg(m) => {
                check_row(self.n_features(), row)?;
                Ok((m.decision_unchecked(row), ScoreScale::LogOdds))
            }
            _ => Ok((self.score(row)?, self.score_scale())),
        }
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<u8>> {
        x.row_iter().map(|r| self.predict(r)).collect()
    }

    pub fn score_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.row_iter().map(|r| self.score(r)).collect()
    }
}

/// Versioned on-disk layout of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEnvelope {
    pub format_version: u32,
    pub classifier: TrainedClassifier,
}

impl ModelEnvelope {
    pub fn new(classifier: TrainedClassifier) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            classifier,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: ModelEnvelope = serde_json::from_str(s)?;
        if env.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported model format version {}",
                env.format_version
            )));
        }
        Ok(env)
    }
}
