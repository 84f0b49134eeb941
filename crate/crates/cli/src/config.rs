//! Run configuration: a flat `key = value` file, `#` starts a comment.
//!
//! ```text
//! pipeline = both
//! seed = 42
//! segment.input = social.csv
//! segment.pca_k = 4
//! predict.input = grad.csv
//! predict.split_counts = 764,65,263
//! predict.grid.knn = n_neighbors=3,5;weights=uniform
//! ```
//!
//! Unknown keys are rejected. Later assignments (and command-line
//! overrides) replace earlier ones.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use tabkit_core::classify::ModelKind;
use tabkit_core::cluster::KMeansParams;
use tabkit_core::modelsel::{ParamGrid, Scoring};
use tabkit_core::pca::ComponentSelection;
use tabkit_core::preprocess::SplitSpec;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineSel {
    Segmentation,
    Prediction,
    Both,
}

impl PipelineSel {
    pub fn segmentation(self) -> bool {
        matches!(self, PipelineSel::Segmentation | PipelineSel::Both)
    }

    pub fn prediction(self) -> bool {
        matches!(self, PipelineSel::Prediction | PipelineSel::Both)
    }
}

impl FromStr for PipelineSel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "segmentation" => Ok(PipelineSel::Segmentation),
            "prediction" => Ok(PipelineSel::Prediction),
            "both" => Ok(PipelineSel::Both),
            _ => Err(format!("expected segmentation, prediction or both, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentConfig {
    pub input: Option<PathBuf>,
    /// Numeric feature columns; empty means every numeric column.
    pub numeric: Vec<String>,
    /// Categorical columns to one-hot encode; empty means every categorical column.
    pub categorical: Vec<String>,
    pub drop_first: bool,
    pub cap_columns: Vec<String>,
    pub cap_k: f64,
    /// Whether indicator columns are z-scored along with the numeric ones.
    pub standardize_indicators: bool,
    pub pca: ComponentSelection,
    pub k_min: usize,
    pub k_max: usize,
    pub kmeans: KMeansParams,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            input: None,
            numeric: ["Daily_Minutes_Spent", "Posts_Per_Day", "Likes_Per_Day", "Follows_Per_Day"]
                .map(String::from)
                .to_vec(),
            categorical: vec!["App".into()],
            drop_first: true,
            cap_columns: Vec::new(),
            cap_k: 1.5,
            standardize_indicators: false,
            pca: ComponentSelection::FixedK(4),
            k_min: 2,
            k_max: 8,
            kmeans: KMeansParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictConfig {
    pub input: Option<PathBuf>,
    pub label: String,
    pub positive: Option<String>,
    /// Feature columns; empty means every column except the label.
    pub features: Vec<String>,
    pub drop_first: bool,
    pub cap_columns: Vec<String>,
    pub cap_k: f64,
    pub standardize_indicators: bool,
    pub split: SplitSpec,
    pub models: Vec<ModelKind>,
    /// Grid overrides in `a=1,2;b=x` form, keyed by model name.
    pub grids: BTreeMap<String, String>,
    pub cv_folds: usize,
    pub scoring: Scoring,
    pub shap_background: usize,
    pub shap_instances: usize,
    pub shap_permutations: usize,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            input: None,
            label: "Entrepreneurship".into(),
            positive: None,
            features: Vec::new(),
            drop_first: false,
            cap_columns: Vec::new(),
            cap_k: 1.5,
            standardize_indicators: true,
            split: SplitSpec::Ratios {
                train: 0.7,
                validation: 0.1,
                test: 0.2,
            },
            models: ModelKind::ALL.to_vec(),
            grids: BTreeMap::new(),
            cv_folds: 5,
            scoring: Scoring::F1,
            shap_background: 50,
            shap_instances: 30,
            shap_permutations: 64,
        }
    }
}

impl PredictConfig {
    pub fn grid(&self, kind: ModelKind) -> Result<ParamGrid, CliError> {
        match self.grids.get(kind.name()) {
            Some(text) => text
                .parse()
                .map_err(|e| CliError::Usage(format!("predict.grid.{kind}: {e}"))),
            None => Ok(tabkit_core::modelsel::default_grid(kind)),
        }
    }
}

/// Everything a run depends on. `out`, `svg` and `threads` do not change
/// any result, so they are left out of the serialized form that reports
/// embed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub pipeline: PipelineSel,
    pub seed: u64,
    pub strict: bool,
    pub segment: SegmentConfig,
    pub predict: PredictConfig,
    #[serde(skip)]
    pub svg: bool,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineSel::Both,
            seed: 42,
            strict: false,
            svg: false,
            segment: SegmentConfig::default(),
            predict: PredictConfig::default(),
            out: PathBuf::from("tabkit-out"),
            threads: None,
        }
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    v.parse()
        .map_err(|e| CliError::Usage(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Usage(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn triple<T: FromStr>(key: &str, v: &str) -> Result<[T; 3], CliError>
where
    T::Err: fmt::Display,
{
    let parts = list(v);
    if parts.len() != 3 {
        return Err(CliError::Usage(format!("{key}: expected three comma-separated values")));
    }
    Ok([parse(key, &parts[0])?, parse(key, &parts[1])?, parse(key, &parts[2])?])
}

impl RunConfig {
    /// Reads a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::Usage(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override {pair:?}: expected key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        let s = &mut self.segment;
        let p = &mut self.predict;
        match key {
            "pipeline" => self.pipeline = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "strict" => self.strict = parse_bool(key, v)?,
            "svg" => self.svg = parse_bool(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "threads" => self.threads = Some(parse(key, v)?),

            "segment.input" => s.input = Some(PathBuf::from(v)),
            "segment.numeric" => s.numeric = list(v),
            "segment.categorical" => s.categorical = list(v),
            "segment.drop_first" => s.drop_first = parse_bool(key, v)?,
            "segment.cap_columns" => s.cap_columns = list(v),
            "segment.cap_k" => s.cap_k = parse(key, v)?,
            "segment.standardize_indicators" => s.standardize_indicators = parse_bool(key, v)?,
            "segment.pca_k" => s.pca = ComponentSelection::FixedK(parse(key, v)?),
            "segment.pca_variance" => s.pca = ComponentSelection::VarianceTarget(parse(key, v)?),
            "segment.k_min" => s.k_min = parse(key, v)?,
            "segment.k_max" => s.k_max = parse(key, v)?,
            "segment.kmeans_restarts" => s.kmeans.n_init = parse(key, v)?,
            "segment.kmeans_max_iter" => s.kmeans.max_iter = parse(key, v)?,
            "segment.kmeans_tol" => s.kmeans.tol = parse(key, v)?,

            "predict.input" => p.input = Some(PathBuf::from(v)),
            "predict.label" => p.label = v.to_string(),
            "predict.positive" => p.positive = (!v.is_empty()).then(|| v.to_string()),
            "predict.features" => p.features = list(v),
            "predict.drop_first" => p.drop_first = parse_bool(key, v)?,
            "predict.cap_columns" => p.cap_columns = list(v),
            "predict.cap_k" => p.cap_k = parse(key, v)?,
            "predict.standardize_indicators" => p.standardize_indicators = parse_bool(key, v)?,
            "predict.split_ratios" => {
                let [train, validation, test] = triple(key, v)?;
                p.split = SplitSpec::Ratios { train, validation, test };
            }
            "predict.split_counts" => {
                let [train, validation, test] = triple(key, v)?;
                p.split = SplitSpec::Counts { train, validation, test };
            }
            "predict.models" => {
                p.models = list(v).iter().map(|m| parse(key, m)).collect::<Result<_, _>>()?;
            }
            "predict.cv_folds" => p.cv_folds = parse(key, v)?,
            "predict.scoring" => {
                p.scoring = match v {
                    "f1" => Scoring::F1,
                    "accuracy" => Scoring::Accuracy,
                    _ => return Err(CliError::Usage(format!("{key}: expected f1 or accuracy, got {v:?}"))),
                }
            }
            "predict.shap_background" => p.shap_background = parse(key, v)?,
            "predict.shap_instances" => p.shap_instances = parse(key, v)?,
            "predict.shap_permutations" => p.shap_permutations = parse(key, v)?,
            _ => match key.strip_prefix("predict.grid.") {
                Some(model) => {
                    let kind: ModelKind = parse(key, model)?;
                    v.parse::<ParamGrid>()
                        .map_err(|e| CliError::Usage(format!("{key}: {e}")))?;
                    p.grids.insert(kind.name().to_string(), v.to_string());
                }
                None => return Err(CliError::Usage(format!("unknown config key {key:?}"))),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        let s = &self.segment;
        let p = &self.predict;
        if self.pipeline.segmentation() && s.input.is_none() {
            return usage("segmentation needs segment.input".into());
        }
        if self.pipeline.prediction() && p.input.is_none() {
            return usage("prediction needs predict.input".into());
        }
        if s.k_min < 2 || s.k_min > s.k_max {
            return usage(format!("segment k range [{}, {}] is invalid", s.k_min, s.k_max));
        }
        if s.kmeans.n_init == 0 || s.kmeans.max_iter == 0 {
            return usage("segment.kmeans_restarts and segment.kmeans_max_iter must be >= 1".into());
        }
        if !(s.cap_k >= 0.0) || !(p.cap_k >= 0.0) {
            return usage("cap_k must be non-negative".into());
        }
        if p.models.is_empty() {
            return usage("predict.models is empty".into());
        }
        if p.cv_folds < 2 {
            return usage("predict.cv_folds must be >= 2".into());
        }
        if p.shap_background == 0 || p.shap_instances == 0 || p.shap_permutations == 0 {
            return usage("shap sizes must be >= 1".into());
        }
        if self.threads == Some(0) {
            return usage("threads must be >= 1".into());
        }
        for kind in &p.models {
            p.grid(*kind)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let mut c = RunConfig::default();
        c.apply_text(
            "# comment\npipeline = prediction\nseed=7 # trailing\npredict.split_counts = 764, 65, 263\n\
             predict.models = logreg,svm\npredict.grid.svm = C=1;gamma=scale\n",
        )
        .unwrap();
        assert_eq!(c.pipeline, PipelineSel::Prediction);
        assert_eq!(c.seed, 7);
        assert_eq!(
            c.predict.split,
            SplitSpec::Counts {
                train: 764,
                validation: 65,
                test: 263
            }
        );
        assert_eq!(c.predict.models, vec![ModelKind::Logreg, ModelKind::Svm]);
        assert_eq!(c.predict.grid(ModelKind::Svm).unwrap().size(), 1);
        assert_eq!(c.predict.grid(ModelKind::Knn).unwrap().size(), 16);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply_text("segment.colour = red"), Err(CliError::Usage(_))));
        assert!(matches!(c.set_pair("seed"), Err(CliError::Usage(_))));
        assert!(matches!(c.set("seed", "-1"), Err(CliError::Usage(_))));
    }

    #[test]
    fn validation_requires_inputs() {
        let c = RunConfig::default();
        assert!(c.validate().is_err());
        let mut c = RunConfig {
            pipeline: PipelineSel::Segmentation,
            ..Default::default()
        };
        c.set("segment.input", "x.csv").unwrap();
        c.validate().unwrap();
    }
}
