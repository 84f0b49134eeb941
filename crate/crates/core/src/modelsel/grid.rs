//! Exhaustive grid search with stratified k-fold cross-validation.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use super::cv::kfold_splits;
use super::metrics::{confusion, ConfusionMatrix};
use crate::classify::forest::{forest_fit_on, ForestParams};
use crate::classify::logreg::log_loss;
use crate::classify::tree::{tree_fit_on, TreeData};
use crate::classify::{
    fit, ClassWeight, Criterion, GammaRule, MaxFeatures, Metric, ModelKind, ModelParams, Penalty, Splitter,
    TrainedClassifier, TreeParams, Weighting,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match self {
            ParamValue::Int(v) if *v >= 0 => Some(*v as usize),
            ParamValue::Float(v) if *v >= 0.0 && v.fract() == 0.0 => Some(*v as usize),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Parses one token: `None`, booleans, integers, floats, else a string.
    pub fn parse(token: &str) -> ParamValue {
        let t = token.trim();
        match t {
            "None" | "none" | "null" => return ParamValue::None,
            "True" | "true" => return ParamValue::Bool(true),
            "False" | "false" => return ParamValue::Bool(false),
            _ => {}
        }
        if let Ok(v) = t.parse::<i64>() {
            return ParamValue::Int(v);
        }
        if let Ok(v) = t.parse::<f64>() {
            return ParamValue::Float(v);
        }
        ParamValue::Str(t.to_string())
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::None => f.write_str("None"),
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v:?}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

/// One configuration: parameter names with their chosen values, in grid order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet(pub Vec<(String, ParamValue)>);

impl ParamSet {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

impl Serialize for ParamSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl fmt::Display for ParamSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Ordered map from parameter name to candidate values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamGrid {
    entries: Vec<(String, Vec<ParamValue>)>,
}

impl ParamGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with<V: Into<ParamValue>>(mut self, name: &str, values: impl IntoIterator<Item = V>) -> Self {
        self.set(name, values.into_iter().map(Into::into).collect());
        self
    }

    /// Replaces the values of `name`, or appends it.
    pub fn set(&mut self, name: &str, values: Vec<ParamValue>) {
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(e) => e.1 = values,
            None => self.entries.push((name.to_string(), values)),
        }
    }

    pub fn entries(&self) -> &[(String, Vec<ParamValue>)] {
        &self.entries
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn size(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.len()).product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::InvalidGrid("grid has no parameters".into()));
        }
        for (i, (n, v)) in self.entries.iter().enumerate() {
            if v.is_empty() {
                return Err(Error::InvalidGrid(format!("parameter {n:?} has no values")));
            }
            if self.entries[..i].iter().any(|(m, _)| m == n) {
                return Err(Error::InvalidGrid(format!("parameter {n:?} listed twice")));
            }
        }
        Ok(())
    }

    /// Cartesian product with the first parameter varying slowest.
    pub fn configs(&self) -> Vec<ParamSet> {
        let mut out = Vec::with_capacity(self.size());
        let mut idx = vec![0usize; self.entries.len()];
        if self.entries.iter().any(|(_, v)| v.is_empty()) {
            return out;
        }
        loop {
            out.push(ParamSet(
                self.entries
                    .iter()
                    .zip(&idx)
                    .map(|((n, v), &i)| (n.clone(), v[i].clone()))
                    .collect(),
            ));
            let mut d = self.entries.len();
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < self.entries[d].1.len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

/// Parses `name=v1,v2;name2=v3`.
impl FromStr for ParamGrid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut g = ParamGrid::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, values) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidGrid(format!("expected name=values, got {part:?}")))?;
            let name = name.trim();
            if g.entries.iter().any(|(n, _)| n == name) {
                return Err(Error::InvalidGrid(format!("parameter {name:?} listed twice")));
            }
            g.set(name, values.split(',').map(ParamValue::parse).collect());
        }
        g.validate()?;
        Ok(g)
    }
}

impl fmt::Display for ParamGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{n}=")?;
            for (j, x) in v.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
        }
        Ok(())
    }
}

/// The published search space for each model kind.
pub fn default_grid(kind: ModelKind) -> ParamGrid {
    use ParamValue as V;
    match kind {
        ModelKind::Logreg => ParamGrid::new()
            .with("penalty", ["l1", "l2"])
            .with("C", [0.001, 0.01, 0.1, 1.0, 10.0])
            .with("solver", ["liblinear"])
            .with("max_iter", [2000i64])
            .with("random_state", [42i64]),
        ModelKind::Tree => {
            let mut g = ParamGrid::new().with("criterion", ["gini", "entropy", "log_loss"]);
            g.set("max_depth", vec![V::None, V::Int(5), V::Int(10), V::Int(20), V::Int(50)]);
            g = g
                .with("min_samples_split", [2i64, 5, 10, 20])
                .with("min_samples_leaf", [1i64, 2, 5, 10]);
            g.set("max_features", vec![V::None, "sqrt".into(), "log2".into()]);
            g.set("max_leaf_nodes", vec![V::None, V::Int(10), V::Int(50), V::Int(100)]);
            g = g
                .with("min_impurity_decrease", [0.0, 0.01, 0.1])
                .with("splitter", ["best", "random"]);
            g.set("class_weight", vec![V::None, "balanced".into()]);
            g.with("ccp_alpha", [0.0, 0.01, 0.1])
        }
        ModelKind::Knn => ParamGrid::new()
            .with("n_neighbors", [3i64, 5, 7, 9])
            .with("weights", ["uniform", "distance"])
            .with("metric", ["euclidean", "manhattan"]),
        ModelKind::Forest => {
            let mut g = ParamGrid::new().with("n_estimators", [50i64, 100]);
            g.set("max_depth", vec![V::Int(5), V::Int(10), V::None]);
            g = g
                .with("min_samples_split", [2i64, 5])
                .with("min_samples_leaf", [1i64, 2]);
            g.set("max_features", vec!["sqrt".into(), "log2".into(), V::None]);
            g = g.with("bootstrap", [true, false]).with("criterion", ["gini", "entropy"]);
            g.set("class_weight", vec![V::None, "balanced".into()]);
            g.with("random_state", [21i64])
        }
        ModelKind::Svm => ParamGrid::new()
            .with("C", [0.1, 1.0, 10.0])
            .with("gamma", ["scale", "auto"])
            .with("kernel", ["rbf"])
            .with("probability", [false]),
    }
}

fn bad(name: &str, v: &ParamValue) -> Error {
    Error::InvalidGrid(format!("{name}: unsupported value {v}"))
}

fn positive_f64(name: &str, v: &ParamValue) -> Result<f64> {
    v.as_f64().filter(|x| *x > 0.0 && x.is_finite()).ok_or_else(|| bad(name, v))
}

fn count(name: &str, v: &ParamValue) -> Result<usize> {
    v.as_usize().ok_or_else(|| bad(name, v))
}

fn optional_count(name: &str, v: &ParamValue) -> Result<Option<usize>> {
    match v {
        ParamValue::None => Ok(None),
        _ => count(name, v).map(Some),
    }
}

fn criterion(name: &str, v: &ParamValue) -> Result<Criterion> {
    match v.as_str() {
        Some("gini") => Ok(Criterion::Gini),
        Some("entropy") => Ok(Criterion::Entropy),
        Some("log_loss") => Ok(Criterion::LogLoss),
        _ => Err(bad(name, v)),
    }
}

fn max_features(name: &str, v: &ParamValue) -> Result<MaxFeatures> {
    match v {
        ParamValue::None => Ok(MaxFeatures::All),
        _ => match v.as_str() {
            Some("sqrt") => Ok(MaxFeatures::Sqrt),
            Some("log2") => Ok(MaxFeatures::Log2),
            Some("all") => Ok(MaxFeatures::All),
            _ => Err(bad(name, v)),
        },
    }
}

fn class_weight(name: &str, v: &ParamValue) -> Result<ClassWeight> {
    match v {
        ParamValue::None => Ok(ClassWeight::None),
        _ if v.as_str() == Some("balanced") => Ok(ClassWeight::Balanced),
        _ => Err(bad(name, v)),
    }
}

fn seed(name: &str, v: &ParamValue) -> Result<u64> {
    match v {
        ParamValue::Int(s) if *s >= 0 => Ok(*s as u64),
        _ => Err(bad(name, v)),
    }
}

/// Builds model parameters from one configuration, starting from the
/// model's defaults.
pub fn decode_params(kind: ModelKind, set: &ParamSet) -> Result<ModelParams> {
    let mut params = ModelParams::default_for(kind);
    for (name, v) in &set.0 {
        let n = name.as_str();
        match &mut params {
            ModelParams::Logreg(p) => match n {
                "penalty" => {
                    p.penalty = match v.as_str() {
                        Some("l1") => Penalty::L1,
                        Some("l2") => Penalty::L2,
                        _ => return Err(bad(n, v)),
                    }
                }
                "C" => p.c = positive_f64(n, v)?,
                "max_iter" => p.max_iter = count(n, v)?,
                "tol" => p.tol = positive_f64(n, v)?,
                // The objective is convex with a unique optimum, so the
                // solver name and seed carry no information here.
                "solver" if v.as_str() == Some("liblinear") => {}
                "random_state" => {
                    seed(n, v)?;
                }
                _ => return Err(unknown(kind, n, v)),
            },
            ModelParams::Tree(p) => match n {
                "criterion" => p.criterion = criterion(n, v)?,
                "max_depth" => p.max_depth = optional_count(n, v)?,
                "min_samples_split" => p.min_samples_split = count(n, v)?,
                "min_samples_leaf" => p.min_samples_leaf = count(n, v)?,
                "max_features" => p.max_features = max_features(n, v)?,
                "max_leaf_nodes" => p.max_leaf_nodes = optional_count(n, v)?,
                "min_impurity_decrease" => p.min_impurity_decrease = v.as_f64().ok_or_else(|| bad(n, v))?,
                "splitter" => {
                    p.splitter = match v.as_str() {
                        Some("best") => Splitter::Best,
                        Some("random") => Splitter::Random,
                        _ => return Err(bad(n, v)),
                    }
                }
                "class_weight" => p.class_weight = class_weight(n, v)?,
                "ccp_alpha" => p.ccp_alpha = v.as_f64().ok_or_else(|| bad(n, v))?,
                "random_state" => p.seed = seed(n, v)?,
                _ => return Err(unknown(kind, n, v)),
            },
            ModelParams::Forest(p) => match n {
                "n_estimators" => p.n_estimators = count(n, v)?,
                "max_depth" => p.max_depth = optional_count(n, v)?,
                "min_samples_split" => p.min_samples_split = count(n, v)?,
                "min_samples_leaf" => p.min_samples_leaf = count(n, v)?,
                "max_features" => p.max_features = max_features(n, v)?,
                "bootstrap" => {
                    p.bootstrap = match v {
                        ParamValue::Bool(b) => *b,
                        _ => return Err(bad(n, v)),
                    }
                }
                "criterion" => p.criterion = criterion(n, v)?,
                "class_weight" => p.class_weight = class_weight(n, v)?,
                "random_state" => p.seed = seed(n, v)?,
                _ => return Err(unknown(kind, n, v)),
            },
            ModelParams::Knn(p) => match n {
                "n_neighbors" => p.k = count(n, v)?,
                "weights" => {
                    p.weighting = match v.as_str() {
                        Some("uniform") => Weighting::Uniform,
                        Some("distance") => Weighting::Distance,
                        _ => return Err(bad(n, v)),
                    }
                }
                "metric" => {
                    p.metric = match v.as_str() {
                        Some("euclidean") => Metric::Euclidean,
                        Some("manhattan") => Metric::Manhattan,
                        _ => return Err(bad(n, v)),
                    }
                }
                _ => return Err(unknown(kind, n, v)),
            },
            ModelParams::Svm(p) => match n {
                "C" => p.c = positive_f64(n, v)?,
                "gamma" => {
                    p.gamma = match v {
                        ParamValue::Str(s) if s == "scale" => GammaRule::Scale,
                        ParamValue::Str(s) if s == "auto" => GammaRule::Auto,
                        _ => GammaRule::Value(positive_f64(n, v)?),
                    }
                }
                "tol" => p.tol = positive_f64(n, v)?,
                "max_iter" => p.max_iter = Some(count(n, v)?),
                "kernel" if v.as_str() == Some("rbf") => {}
                "probability" if *v == ParamValue::Bool(false) => {}
                _ => return Err(unknown(kind, n, v)),
            },
        }
    }
    Ok(params)
}

fn unknown(kind: ModelKind, name: &str, v: &ParamValue) -> Error {
    Error::InvalidGrid(format!("{kind}: unsupported parameter {name}={v}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// Positive-class F1.
    F1,
    Accuracy,
}

impl Scoring {
    pub fn score(self, y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
        Ok(self.of(&confusion(y_true, y_pred)?))
    }

    pub fn of(self, cm: &ConfusionMatrix) -> f64 {
        match self {
            Scoring::F1 => cm.f1(),
            Scoring::Accuracy => cm.accuracy(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSearchOptions {
    pub folds: usize,
    pub seed: u64,
    pub scoring: Scoring,
}

impl Default for GridSearchOptions {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 0,
            scoring: Scoring::F1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigResult {
    pub index: usize,
    pub params: ParamSet,
    pub fold_scores: Vec<f64>,
    /// `-inf` (written as null) when the configuration failed.
    pub mean: f64,
    pub std: f64,
    pub train_mean: Option<f64>,
    /// Mean log loss, for models that define one.
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
    pub error: Option<String>,
}

impl ConfigResult {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub model: ModelKind,
    pub scoring: Scoring,
    pub folds: usize,
    pub seed: u64,
    pub configs: Vec<ConfigResult>,
}

#[derive(Debug, Clone)]
pub struct GridSearchOutcome {
    pub kind: ModelKind,
    pub best_index: usize,
    pub best_params: ParamSet,
    pub best_mean_score: f64,
    /// Best configuration refitted on all training rows.
    pub model: TrainedClassifier,
    pub cv: CvResult,
}

struct Fold {
    x_train: Matrix,
    y_train: Vec<u8>,
    x_val: Matrix,
    y_val: Vec<u8>,
    trees: Option<TreeData>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct FoldEval {
    val: f64,
    train: f64,
    train_loss: Option<f64>,
    val_loss: Option<f64>,
}

fn mean_log_loss(model: &TrainedClassifier, x: &Matrix, y: &[u8]) -> Option<f64> {
    match model {
        TrainedClassifier::Logreg(m) => Some(
            x.row_iter()
                .zip(y)
                .map(|(r, &t)| log_loss(t, m.decision_unchecked(r)))
                .sum::<f64>()
                / y.len() as f64,
        ),
        _ => None,
    }
}

fn evaluate_fold(model: &TrainedClassifier, fold: &Fold, scoring: Scoring) -> Result<FoldEval> {
    let pv = model.predict_matrix(&fold.x_val)?;
    let pt = model.predict_matrix(&fold.x_train)?;
    Ok(FoldEval {
        val: scoring.score(&fold.y_val, &pv)?,
        train: scoring.score(&fold.y_train, &pt)?,
        train_loss: mean_log_loss(model, &fold.x_train, &fold.y_train),
        val_loss: mean_log_loss(model, &fold.x_val, &fold.y_val),
    })
}

fn fit_fold(params: &ModelParams, fold: &Fold) -> std::result::Result<TrainedClassifier, String> {
    let fitted = match (params, &fold.trees) {
        (ModelParams::Tree(p), Some(d)) => tree_fit_on(d, p).map(TrainedClassifier::Tree),
        (ModelParams::Forest(p), Some(d)) => forest_fit_on(d, p).map(TrainedClassifier::Forest),
        _ => match fit(params, &fold.x_train, &fold.y_train) {
            // A non-converged fit counts as a failed configuration.
            Ok(f) => match f.warnings.into_iter().next() {
                Some(w) => return Err(w),
                None => Ok(f.model),
            },
            Err(e) => Err(e),
        },
    };
    fitted.map_err(|e| e.to_string())
}

type FoldOutcome = std::result::Result<FoldEval, String>;

fn summarize(index: usize, params: ParamSet, evals: Vec<FoldOutcome>) -> ConfigResult {
    let mut ok = Vec::with_capacity(evals.len());
    for (f, e) in evals.into_iter().enumerate() {
        match e {
            Ok(v) => ok.push(v),
            Err(msg) => {
                return ConfigResult {
                    index,
                    params,
                    fold_scores: Vec::new(),
                    mean: f64::NEG_INFINITY,
                    std: f64::NAN,
                    train_mean: None,
                    train_loss: None,
                    val_loss: None,
                    error: Some(format!("fold {f}: {msg}")),
                }
            }
        }
    }
    let k = ok.len() as f64;
    let fold_scores: Vec<f64> = ok.iter().map(|e| e.val).collect();
    let mean = fold_scores.iter().sum::<f64>() / k;
    let std = (fold_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / k).sqrt();
    let avg = |f: fn(&FoldEval) -> Option<f64>| -> Option<f64> {
        ok.iter().map(f).sum::<Option<f64>>().map(|s| s / k)
    };
    ConfigResult {
        index,
        params,
        fold_scores,
        mean,
        std,
        train_mean: avg(|e| Some(e.train)),
        train_loss: avg(|e| e.train_loss),
        val_loss: avg(|e| e.val_loss),
        error: None,
    }
}

fn make_folds(kind: ModelKind, x: &Matrix, y: &[u8], opts: &GridSearchOptions) -> Result<Vec<Fold>> {
    let splits = kfold_splits(y, opts.folds, opts.seed)?;
    let uses_trees = matches!(kind, ModelKind::Tree | ModelKind::Forest);
    splits
        .iter()
        .map(|(tr, va)| {
            let x_train = x.select_rows(tr);
            let y_train: Vec<u8> = tr.iter().map(|&i| y[i]).collect();
            let trees = if uses_trees {
                Some(TreeData::new(&x_train, &y_train)?)
            } else {
                None
            };
            Ok(Fold {
                x_val: x.select_rows(va),
                y_val: va.iter().map(|&i| y[i]).collect(),
                x_train,
                y_train,
                trees,
            })
        })
        .collect()
}

/// Scores every configuration of `grid` by k-fold CV and refits the best.
///
/// Results are reduced in grid order, so the outcome does not depend on
/// thread scheduling. A configuration whose fit fails (or does not
/// converge) on any fold scores `-inf` and records the reason.
pub fn grid_search(
    kind: ModelKind,
    grid: &ParamGrid,
    x: &Matrix,
    y: &[u8],
    opts: &GridSearchOptions,
) -> Result<GridSearchOutcome> {
    grid.validate()?;
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.rows(),
            found: y.len(),
        });
    }
    let configs = grid.configs();
    let decoded: Vec<ModelParams> = configs
        .iter()
        .map(|c| decode_params(kind, c))
        .collect::<Result<_>>()?;
    let folds = make_folds(kind, x, y, opts)?;

    let evals: Vec<Vec<FoldOutcome>> = if kind == ModelKind::Tree {
        tree_evals(&decoded, &folds, opts.scoring)
    } else if kind == ModelKind::Forest {
        forest_evals(&decoded, &folds, opts.scoring)
    } else {
        direct_evals(&decoded, &folds, opts.scoring)
    };
    let results: Vec<ConfigResult> = configs
        .into_iter()
        .zip(evals)
        .enumerate()
        .map(|(i, (c, e))| summarize(i, c, e))
        .collect();

    let mut best: Option<usize> = None;
    for r in &results {
        if !r.failed() && best.is_none_or(|b| r.mean > results[b].mean) {
            best = Some(r.index);
        }
    }
    let best = best.ok_or_else(|| Error::InvalidGrid(format!("every {kind} configuration failed")))?;
    let model = fit(&decoded[best], x, y)?.model;
    Ok(GridSearchOutcome {
        kind,
        best_index: best,
        best_params: results[best].params.clone(),
        best_mean_score: results[best].mean,
        model,
        cv: CvResult {
            model: kind,
            scoring: opts.scoring,
            folds: opts.folds,
            seed: opts.seed,
            configs: results,
        },
    })
}

/// Fits and scores every configuration on every fold independently.
fn direct_evals(decoded: &[ModelParams], folds: &[Fold], scoring: Scoring) -> Vec<Vec<FoldOutcome>> {
    decoded
        .par_iter()
        .map(|p| {
            folds
                .iter()
                .map(|fold| {
                    let m = fit_fold(p, fold)?;
                    evaluate_fold(&m, fold, scoring).map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect()
}

/// Trees that differ only in growth limits or `ccp_alpha` share one
/// unlimited fit per fold. Each configuration's tree is a truncation of it
/// followed by pruning, which is the tree a separate fit would give.
fn tree_evals(decoded: &[ModelParams], folds: &[Fold], scoring: Scoring) -> Vec<Vec<FoldOutcome>> {
    let mut groups: Vec<(TreeParams, Vec<usize>)> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    for (i, p) in decoded.iter().enumerate() {
        let ModelParams::Tree(tp) = p else { unreachable!("tree grid") };
        let base = TreeParams {
            max_depth: None,
            min_samples_split: 2,
            max_leaf_nodes: None,
            min_impurity_decrease: 0.0,
            ccp_alpha: 0.0,
            ..tp.clone()
        };
        let key = serde_json::to_string(&base).expect("params serialize");
        let g = *lookup.entry(key).or_insert_with(|| {
            groups.push((base, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(i);
    }
    let per_group: Vec<Vec<(usize, Vec<FoldOutcome>)>> = groups
        .par_iter()
        .map(|(base, members)| {
            let mut out: Vec<(usize, Vec<FoldOutcome>)> =
                members.iter().map(|&i| (i, Vec::with_capacity(folds.len()))).collect();
            for fold in folds {
                let data = fold.trees.as_ref().expect("tree data");
                match tree_fit_on(data, base) {
                    Ok(full) => {
                        // Route every row once; pruned variants only change
                        // which node answers for each leaf.
                        let leaf_counts = |x: &Matrix, y: &[u8]| {
                            let mut c = vec![[0usize; 2]; full.nodes.len()];
                            for (r, &t) in x.row_iter().zip(y) {
                                c[full.leaf_index(r)][t as usize] += 1;
                            }
                            c
                        };
                        let val = leaf_counts(&fold.x_val, &fold.y_val);
                        let train = leaf_counts(&fold.x_train, &fold.y_train);
                        for (i, evals) in out.iter_mut() {
                            let ModelParams::Tree(tp) = &decoded[*i] else { unreachable!() };
                            if let Err(e) = tp.validate() {
                                evals.push(Err(e.to_string()));
                                continue;
                            }
                            let mask = full.prune_mask(tp.ccp_alpha, full.truncation_mask(tp));
                            let rep = full.effective_leaves(&mask);
                            let score = |counts: &[[usize; 2]]| {
                                let mut cm = ConfusionMatrix::default();
                                for (leaf, c) in counts.iter().enumerate() {
                                    if c[0] + c[1] == 0 {
                                        continue;
                                    }
                                    if full.nodes[rep[leaf]].predicted_class() == 1 {
                                        cm.fp += c[0];
                                        cm.tp += c[1];
                                    } else {
                                        cm.tn += c[0];
                                        cm.fn_ += c[1];
                                    }
                                }
                                scoring.of(&cm)
                            };
                            evals.push(Ok(FoldEval {
                                val: score(&val),
                                train: score(&train),
                                train_loss: None,
                                val_loss: None,
                            }));
                        }
                    }
                    Err(e) => {
                        for (_, evals) in out.iter_mut() {
                            evals.push(Err(e.to_string()));
                        }
                    }
                }
            }
            out
        })
        .collect();
    let mut evals: Vec<Vec<FoldOutcome>> = vec![Vec::new(); decoded.len()];
    for (i, e) in per_group.into_iter().flatten() {
        evals[i] = e;
    }
    evals
}

/// Forests that differ only in `n_estimators` or growth limits share one
/// fit per fold. Tree `t` depends only on the seed and `t`, so a smaller
/// forest is a prefix of the largest one, and each limited tree is a
/// truncation of the unlimited tree with the same bootstrap sample.
fn forest_evals(decoded: &[ModelParams], folds: &[Fold], scoring: Scoring) -> Vec<Vec<FoldOutcome>> {
    let mut groups: Vec<(ForestParams, Vec<usize>)> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    for (i, p) in decoded.iter().enumerate() {
        let ModelParams::Forest(fp) = p else { unreachable!("forest grid") };
        let base = ForestParams {
            n_estimators: 0,
            max_depth: None,
            min_samples_split: 2,
            ..fp.clone()
        };
        let key = serde_json::to_string(&base).expect("params serialize");
        let g = *lookup.entry(key).or_insert_with(|| {
            groups.push((base, Vec::new()));
            groups.len() - 1
        });
        let (base, members) = &mut groups[g];
        base.n_estimators = base.n_estimators.max(fp.n_estimators);
        members.push(i);
    }
    let per_group: Vec<Vec<(usize, Vec<FoldOutcome>)>> = groups
        .par_iter()
        .map(|(base, members)| {
            let mut out: Vec<(usize, Vec<FoldOutcome>)> =
                members.iter().map(|&i| (i, Vec::with_capacity(folds.len()))).collect();
            for fold in folds {
                let data = fold.trees.as_ref().expect("tree data");
                let full = match forest_fit_on(data, base) {
                    Ok(f) => f,
                    Err(e) => {
                        for (_, evals) in out.iter_mut() {
                            evals.push(Err(e.to_string()));
                        }
                        continue;
                    }
                };
                let leaves = |x: &Matrix| -> Vec<Vec<usize>> {
                    full.trees
                        .iter()
                        .map(|t| x.row_iter().map(|r| t.leaf_index(r)).collect())
                        .collect()
                };
                let val_leaves = leaves(&fold.x_val);
                let train_leaves = leaves(&fold.x_train);
                // Cumulative positive votes per limit setting, shared by the
                // members that differ only in forest size.
                let mut cache: HashMap<(Option<usize>, usize), (Vec<Vec<u32>>, Vec<Vec<u32>>)> = HashMap::new();
                for (i, evals) in out.iter_mut() {
                    let ModelParams::Forest(fp) = &decoded[*i] else { unreachable!() };
                    let tp = fp.tree_params();
                    if let Err(e) = tp.validate() {
                        evals.push(Err(e.to_string()));
                        continue;
                    }
                    let m = fp.n_estimators;
                    if m == 0 {
                        evals.push(Err(Error::InvalidParameter("n_estimators must be >= 1".into()).to_string()));
                        continue;
                    }
                    let (val, train) = cache.entry((fp.max_depth, fp.min_samples_split)).or_insert_with(|| {
                        let mut val_acc = vec![0u32; fold.y_val.len()];
                        let mut train_acc = vec![0u32; fold.y_train.len()];
                        let mut val = Vec::with_capacity(full.trees.len());
                        let mut train = Vec::with_capacity(full.trees.len());
                        for (t, tree) in full.trees.iter().enumerate() {
                            let rep = tree.effective_leaves(&tree.truncation_mask(&tp));
                            let vote = |leaf: usize| u32::from(tree.nodes[rep[leaf]].predicted_class());
                            for (a, &l) in val_acc.iter_mut().zip(&val_leaves[t]) {
                                *a += vote(l);
                            }
                            for (a, &l) in train_acc.iter_mut().zip(&train_leaves[t]) {
                                *a += vote(l);
                            }
                            val.push(val_acc.clone());
                            train.push(train_acc.clone());
                        }
                        (val, train)
                    });
                    let score = |v: &[u32], y: &[u8]| {
                        let pred: Vec<u8> = v.iter().map(|&c| u8::from(2 * c as usize > m)).collect();
                        scoring.score(y, &pred)
                    };
                    evals.push(
                        score(&val[m - 1], &fold.y_val)
                            .and_then(|v| {
                                Ok(FoldEval {
                                    val: v,
                                    train: score(&train[m - 1], &fold.y_train)?,
                                    train_loss: None,
                                    val_loss: None,
                                })
                            })
                            .map_err(|e| e.to_string()),
                    );
                }
            }
            out
        })
        .collect();
    let mut evals: Vec<Vec<FoldOutcome>> = vec![Vec::new(); decoded.len()];
    for (i, e) in per_group.into_iter().flatten() {
        evals[i] = e;
    }
    evals
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningPoint {
    pub index: usize,
    pub train_score: Option<f64>,
    pub val_score: f64,
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
}

/// One point per configuration, in grid order.
pub fn tuning_curves(cv: &CvResult) -> Vec<TuningPoint> {
    cv.configs
        .iter()
        .map(|c| TuningPoint {
            index: c.index,
            train_score: c.train_mean,
            val_score: c.mean,
            train_loss: c.train_loss,
            val_loss: c.val_loss,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_grid_sizes() {
        assert_eq!(default_grid(ModelKind::Logreg).size(), 10);
        assert_eq!(default_grid(ModelKind::Tree).size(), 103_680);
        assert_eq!(default_grid(ModelKind::Knn).size(), 16);
        assert_eq!(default_grid(ModelKind::Forest).size(), 576);
        assert_eq!(default_grid(ModelKind::Svm).size(), 6);
        for k in ModelKind::ALL {
            let g = default_grid(k);
            let cs = g.configs();
            assert_eq!(cs.len(), g.size());
            decode_params(k, &cs[0]).unwrap();
            decode_params(k, &cs[cs.len() - 1]).unwrap();
        }
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let g: ParamGrid = "a=1,2;b=x,y,z".parse().unwrap();
        let cs: Vec<String> = g.configs().iter().map(|c| c.to_string()).collect();
        assert_eq!(cs, ["a=1 b=x", "a=1 b=y", "a=1 b=z", "a=2 b=x", "a=2 b=y", "a=2 b=z"]);
    }

    #[test]
    fn grid_text_round_trip() {
        let g = default_grid(ModelKind::Svm);
        let back: ParamGrid = g.to_string().parse().unwrap();
        assert_eq!(back, g);
    }

    fn shared_fits_match_direct_fits(kind: ModelKind, grid: &str) {
        let mut rng = crate::rng::SplitMix64::new(5);
        let rows: Vec<Vec<f64>> = (0..90)
            .map(|_| (0..5).map(|_| (rng.next_f64() * 10.0).round()).collect())
            .collect();
        let y: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(r[0] - r[1] + 5.0 * rng.next_f64() > 2.5))
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let grid: ParamGrid = grid.parse().unwrap();
        let decoded: Vec<ModelParams> = grid.configs().iter().map(|c| decode_params(kind, c).unwrap()).collect();
        let opts = GridSearchOptions { folds: 3, seed: 1, scoring: Scoring::F1 };
        let folds = make_folds(kind, &x, &y, &opts).unwrap();
        let shared = match kind {
            ModelKind::Tree => tree_evals(&decoded, &folds, opts.scoring),
            _ => forest_evals(&decoded, &folds, opts.scoring),
        };
        assert_eq!(shared, direct_evals(&decoded, &folds, opts.scoring));
    }

    #[test]
    fn tree_grid_sharing_is_exact() {
        shared_fits_match_direct_fits(
            ModelKind::Tree,
            "criterion=gini,entropy;max_depth=None,2,4;min_samples_split=2,10;min_samples_leaf=1,3;\
             max_features=None,sqrt;max_leaf_nodes=None,4;min_impurity_decrease=0.0,0.01;\
             splitter=best,random;ccp_alpha=0.0,0.01,0.1",
        );
    }

    #[test]
    fn forest_grid_sharing_is_exact() {
        shared_fits_match_direct_fits(
            ModelKind::Forest,
            "n_estimators=3,10;max_depth=3,None;min_samples_split=2,9;min_samples_leaf=1,2;\
             max_features=sqrt,None;bootstrap=true,false;class_weight=None,balanced",
        );
    }

    #[test]
    fn unknown_parameter_rejected() {
        let set = ParamSet(vec![("depth".into(), ParamValue::Int(3))]);
        assert!(matches!(decode_params(ModelKind::Tree, &set), Err(Error::InvalidGrid(_))));
    }
}
