//! The two analysis branches and the full run.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use tabkit_core::classify::{ModelKind, TrainedClassifier};
use tabkit_core::cluster::{characterize, kmeans_fit, select_k, silhouette};
use tabkit_core::explain::{background_sample, shap_summary, ShapMethod};
use tabkit_core::modelsel::{
    evaluate, grid_search, tuning_curves, EvaluationReport, GridSearchOptions, ParamGrid,
};
use tabkit_core::pca::{fit_pca, ComponentSelection};
use tabkit_core::preprocess::{binary_labels, stratified_split_labels, BinaryLabels};
use tabkit_core::tabular::{audit, describe};
use tabkit_core::{Error, Matrix, SplitMix64, Table};

use crate::config::{PredictConfig, RunConfig, SegmentConfig};
use crate::error::{CliError, CliResult};
use crate::output;
use crate::prepare::{drop_incomplete, load, split_kinds, ModelBundle, PrepareOptions, Preprocessor};
use crate::report::*;

/// Per-stage seeds: the master seed expanded by stage name.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    SplitMix64::derive_named_seed(seed, stage)
}

/// Wall-clock time per stage, kept out of the report.
#[derive(Debug, Default, Serialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

struct Tracker {
    current: String,
    timings: Timings,
}

impl Tracker {
    fn new() -> Self {
        Self {
            current: String::new(),
            timings: Timings::default(),
        }
    }

    fn run<T>(&mut self, stage: &str, f: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
        self.current = stage.to_string();
        let t0 = Instant::now();
        let r = f();
        self.timings.stages.push((stage.to_string(), t0.elapsed().as_secs_f64()));
        r
    }
}

/// Numeric and categorical feature columns for segmentation. An empty list
/// selects every column of that kind.
fn segment_columns(t: &Table, s: &SegmentConfig) -> CliResult<(Vec<String>, Vec<String>)> {
    let (all_num, all_cat) = split_kinds(t, &[], None)?;
    let pick = |wanted: &[String], all: &[String], numeric: bool| -> CliResult<Vec<String>> {
        if wanted.is_empty() {
            return Ok(all.to_vec());
        }
        for w in wanted {
            t.column(w)?;
            if !all.contains(w) {
                return Err(if numeric {
                    Error::ColumnNotNumeric(w.clone())
                } else {
                    Error::ColumnNotCategorical(w.clone())
                }
                .into());
            }
        }
        Ok(wanted.to_vec())
    };
    Ok((pick(&s.numeric, &all_num, true)?, pick(&s.categorical, &all_cat, false)?))
}

fn input_summary(t: &Table, dropped: usize) -> CliResult<InputSummary> {
    Ok(InputSummary {
        rows_read: t.n_rows(),
        rows_dropped: dropped,
        audit: audit(t),
        describe: describe(t)?,
    })
}

fn numeric_subtable(t: &Table, names: &[String]) -> CliResult<Table> {
    let cols = names.iter().map(|n| t.column(n).cloned()).collect::<Result<Vec<_>, _>>()?;
    Ok(Table::new(t.name.clone(), cols)?)
}

/// The segmentation inputs: complete rows, chosen columns and the scaled
/// feature matrix.
pub struct SegmentData {
    pub clean: Table,
    pub numeric: Vec<String>,
    pub pre: Preprocessor,
    pub z: Matrix,
}

pub fn segment_data(table: &Table, s: &SegmentConfig, rep: &mut SegmentationReport) -> CliResult<SegmentData> {
    let (numeric, categorical) = segment_columns(table, s)?;
    let used: Vec<String> = numeric.iter().chain(&categorical).cloned().collect();
    let (clean, dropped) = drop_incomplete(table, &used)?;
    rep.input = Some(input_summary(table, dropped)?);
    let all_rows: Vec<usize> = (0..clean.n_rows()).collect();
    let opts = PrepareOptions {
        numeric: &numeric,
        categorical: &categorical,
        drop_first: s.drop_first,
        cap_columns: &s.cap_columns,
        cap_k: s.cap_k,
        standardize_indicators: s.standardize_indicators,
    };
    let (pre, z) = Preprocessor::fit(&clean, &opts, &all_rows)?;
    rep.encodings = pre.encodings.clone();
    rep.caps = pre.caps.clone();
    rep.features = pre.features.clone();
    Ok(SegmentData { clean, numeric, pre, z })
}

/// Fits PCA and returns the component scores.
pub fn segment_pca(d: &SegmentData, select: ComponentSelection, rep: &mut SegmentationReport) -> CliResult<Matrix> {
    let pca = fit_pca(&d.z, select)?;
    rep.pca = Some(PcaSummary {
        k_retained: pca.k_retained,
        cumulative_variance: pca.cumulative_variance(),
        scree: pca.scree_data(),
        loadings: pca.loadings(&d.pre.features)?,
    });
    Ok(pca.transform(&d.z)?)
}

pub fn segment_kmeans(
    d: &SegmentData,
    proj: &Matrix,
    k: usize,
    s: &SegmentConfig,
    seed: u64,
    rep: &mut SegmentationReport,
) -> CliResult<Vec<usize>> {
    let km = kmeans_fit(proj, k, seed, &s.kmeans)?;
    let sil = match rep.k_selection.as_ref().and_then(|ks| ks.scores.iter().find(|x| x.k == k)) {
        Some(score) => score.silhouette,
        None => silhouette(proj, &km.labels)?,
    };
    rep.kmeans = Some(KMeansSummary {
        k: km.k(),
        inertia: km.inertia,
        silhouette: sil,
        sizes: km.cluster_sizes(),
        n_iter: km.n_iter,
        converged: km.converged,
        restart: km.restart,
    });
    rep.cluster_means = Some(characterize(&km.labels, &numeric_subtable(&d.clean, &d.numeric)?)?);
    Ok(km.labels)
}

fn segmentation(cfg: &RunConfig, rep: &mut SegmentationReport, tr: &mut Tracker) -> CliResult<()> {
    let s = &cfg.segment;
    let path = s.input.as_deref().expect("validated");
    let table = tr.run("segmentation.load", || load(path))?;
    let d = tr.run("segmentation.prepare", || segment_data(&table, s, rep))?;
    let proj = tr.run("segmentation.pca", || segment_pca(&d, s.pca, rep))?;
    let seed = stage_seed(cfg.seed, "kmeans");
    let chosen = tr.run("segmentation.select_k", || {
        let ks = select_k(&proj, s.k_min, s.k_max, seed, &s.kmeans)?;
        let k = ks.chosen_k;
        rep.k_selection = Some(ks);
        Ok(k)
    })?;
    tr.run("segmentation.kmeans", || segment_kmeans(&d, &proj, chosen, s, seed, rep).map(|_| ()))
}

fn count_pos(y: &[u8], idx: &[usize]) -> usize {
    idx.iter().filter(|&&i| y[i] == 1).count()
}

pub fn evaluate_on(model: &TrainedClassifier, x: &Matrix, y: &[u8]) -> CliResult<EvaluationReport> {
    let pred = model.predict_matrix(x)?;
    let scores = model.score_matrix(x)?;
    Ok(evaluate(y, &pred, &scores)?)
}

/// The prediction inputs after labelling, splitting and preparation.
pub struct PredictData {
    pub labels: BinaryLabels,
    pub pre: Preprocessor,
    pub x_train: Matrix,
    pub y_train: Vec<u8>,
    pub x_val: Matrix,
    pub y_val: Vec<u8>,
    pub x_test: Matrix,
    pub y_test: Vec<u8>,
}

pub fn predict_data(table: &Table, p: &PredictConfig, seed: u64, rep: &mut PredictionReport) -> CliResult<PredictData> {
    table.column(&p.label)?;
    if p.features.contains(&p.label) {
        return Err(CliError::Usage(format!("label {:?} is also listed as a feature", p.label)));
    }
    let (numeric, categorical) = split_kinds(table, &p.features, Some(&p.label))?;
    let mut used: Vec<String> = numeric.iter().chain(&categorical).cloned().collect();
    used.push(p.label.clone());
    let (clean, dropped) = drop_incomplete(table, &used)?;
    rep.input = Some(input_summary(table, dropped)?);
    let labels = binary_labels(&clean, &p.label, p.positive.as_deref())?;
    let y = &labels.values;
    let positives = y.iter().filter(|&&v| v == 1).count();
    rep.label = Some(LabelSummary {
        column: p.label.clone(),
        negative: labels.negative.clone(),
        positive: labels.positive.clone(),
        negatives: y.len() - positives,
        positives,
    });
    let split = stratified_split_labels(y, p.split, stage_seed(seed, "split"))?;
    let part = |idx: &[usize]| SplitPart {
        rows: idx.len(),
        positives: count_pos(y, idx),
    };
    rep.split = Some(SplitSummary {
        train: part(&split.train),
        validation: part(&split.validation),
        test: part(&split.test),
    });
    // Fences and scaling come from the training rows only.
    let opts = PrepareOptions {
        numeric: &numeric,
        categorical: &categorical,
        drop_first: p.drop_first,
        cap_columns: &p.cap_columns,
        cap_k: p.cap_k,
        standardize_indicators: p.standardize_indicators,
    };
    let (pre, z) = Preprocessor::fit(&clean, &opts, &split.train)?;
    rep.encodings = pre.encodings.clone();
    rep.caps = pre.caps.clone();
    rep.features = pre.features.clone();
    let pick = |idx: &[usize]| (z.select_rows(idx), idx.iter().map(|&i| y[i]).collect::<Vec<u8>>());
    let (x_train, y_train) = pick(&split.train);
    let (x_val, y_val) = pick(&split.validation);
    let (x_test, y_test) = pick(&split.test);
    Ok(PredictData {
        labels,
        pre,
        x_train,
        y_train,
        x_val,
        y_val,
        x_test,
        y_test,
    })
}

pub fn cv_options(p: &PredictConfig, seed: u64) -> GridSearchOptions {
    GridSearchOptions {
        folds: p.cv_folds,
        seed: stage_seed(seed, "cv"),
        scoring: p.scoring,
    }
}

/// Grid search on the training rows, then scoring on validation and test.
pub fn search_model(
    kind: ModelKind,
    grid: &ParamGrid,
    d: &PredictData,
    opts: &GridSearchOptions,
) -> CliResult<(ModelReport, TrainedClassifier)> {
    let outcome = grid_search(kind, grid, &d.x_train, &d.y_train, opts)?;
    let best = &outcome.cv.configs[outcome.best_index];
    let report = ModelReport {
        kind,
        configurations: outcome.cv.configs.len(),
        failed_configurations: outcome.cv.configs.iter().filter(|c| c.failed()).count(),
        errors: outcome
            .cv
            .configs
            .iter()
            .filter_map(|c| c.error.clone().map(|e| (c.index, e)))
            .collect(),
        best_index: outcome.best_index,
        best_params: outcome.best_params.clone(),
        cv_mean: outcome.best_mean_score,
        cv_std: best.std,
        cv_fold_scores: best.fold_scores.clone(),
        validation: evaluate_on(&outcome.model, &d.x_val, &d.y_val)?,
        test: evaluate_on(&outcome.model, &d.x_test, &d.y_test)?,
        tuning_curve: tuning_curves(&outcome.cv),
    };
    Ok((report, outcome.model))
}

/// Mean |SHAP| of `model` over instances drawn from `x_inst`, against a
/// background drawn from `x_bg`.
pub fn shap_report(
    model: &TrainedClassifier,
    x_bg: &Matrix,
    x_inst: &Matrix,
    names: &[String],
    p: &PredictConfig,
    seed: u64,
) -> CliResult<ShapReport> {
    let bg = background_sample(x_bg, p.shap_background, stage_seed(seed, "shap-background"));
    let inst = background_sample(x_inst, p.shap_instances, stage_seed(seed, "shap-instances"));
    let method = ShapMethod::for_features(names.len(), p.shap_permutations);
    let scale = model.score_scale();
    let f = |r: &[f64]| model.explain_output(r).map(|o| o.0).unwrap_or(f64::NAN);
    let summary = shap_summary(&f, &bg, &inst, names, method, stage_seed(seed, "shap"))?;
    Ok(ShapReport {
        model: model.kind(),
        scale,
        summary,
    })
}

/// Validation accuracy, then CV score; earlier models win exact ties.
pub fn best_model_index(models: &[ModelReport]) -> usize {
    let mut best = 0;
    for (i, m) in models.iter().enumerate().skip(1) {
        let b = &models[best];
        let better = m.validation.accuracy > b.validation.accuracy
            || (m.validation.accuracy == b.validation.accuracy && m.cv_mean > b.cv_mean);
        if better {
            best = i;
        }
    }
    best
}

fn prediction(cfg: &RunConfig, rep: &mut PredictionReport, tr: &mut Tracker) -> CliResult<Option<ModelBundle>> {
    let p = &cfg.predict;
    let path = p.input.as_deref().expect("validated");
    let table = tr.run("prediction.load", || load(path))?;
    let d = tr.run("prediction.prepare", || predict_data(&table, p, cfg.seed, rep))?;
    let opts = cv_options(p, cfg.seed);
    let mut fitted: Vec<TrainedClassifier> = Vec::new();
    for &kind in &p.models {
        let grid = p.grid(kind)?;
        let (report, model) = tr.run(&format!("prediction.gridsearch.{kind}"), || search_model(kind, &grid, &d, &opts))?;
        rep.models.push(report);
        fitted.push(model);
    }
    let best = best_model_index(&rep.models);
    rep.best_model = Some(rep.models[best].kind);
    let shap = tr.run("prediction.shap", || {
        shap_report(&fitted[best], &d.x_train, &d.x_test, &d.pre.features, p, cfg.seed)
    })?;
    rep.shap = Some(shap);
    Ok(Some(ModelBundle::new(&p.label, &d.labels, d.pre, fitted.swap_remove(best))))
}

/// Result of a full run; `failure` is set when a stage aborted.
pub struct RunOutcome {
    pub report: RunReport,
    pub timings: Timings,
    pub bundle: Option<ModelBundle>,
    pub exit_code: i32,
}

fn failure(stage: &str, e: &CliError) -> StageFailure {
    StageFailure {
        stage: stage.to_string(),
        message: e.to_string(),
        exit_code: e.exit_code(),
    }
}

/// Runs the selected branches (concurrently when both are selected) and
/// assembles the report in fixed branch order.
pub fn run(cfg: &RunConfig) -> RunOutcome {
    let seg_branch = || {
        let mut tr = Tracker::new();
        let mut rep = SegmentationReport::default();
        let r = segmentation(cfg, &mut rep, &mut tr);
        (rep, tr, r)
    };
    let pred_branch = || {
        let mut tr = Tracker::new();
        let mut rep = PredictionReport::default();
        let r = prediction(cfg, &mut rep, &mut tr);
        (rep, tr, r)
    };
    let (seg, pred) = match (cfg.pipeline.segmentation(), cfg.pipeline.prediction()) {
        (true, true) => {
            let (a, b) = rayon::join(seg_branch, pred_branch);
            (Some(a), Some(b))
        }
        (true, false) => (Some(seg_branch()), None),
        (false, true) => (None, Some(pred_branch())),
        (false, false) => (None, None),
    };

    let mut report = RunReport {
        environment: Environment::new(cfg.seed),
        config: cfg.clone(),
        complete: true,
        failure: None,
        warnings: Vec::new(),
        segmentation: None,
        prediction: None,
    };
    let mut timings = Timings::default();
    let mut bundle = None;
    if let Some((rep, tr, r)) = seg {
        if let Err(e) = r {
            report.failure.get_or_insert(failure(&tr.current, &e));
        }
        timings.stages.extend(tr.timings.stages);
        report.segmentation = Some(rep);
    }
    if let Some((rep, tr, r)) = pred {
        match r {
            Ok(b) => bundle = b,
            Err(e) => {
                report.failure.get_or_insert(failure(&tr.current, &e));
            }
        }
        timings.stages.extend(tr.timings.stages);
        report.prediction = Some(rep);
    }
    if let Some(pr) = &report.prediction {
        for m in &pr.models {
            report.warnings.extend(m.failure_warnings());
        }
    }
    if cfg.strict && report.failure.is_none() && !report.warnings.is_empty() {
        report.failure = Some(failure("warnings", &CliError::Strict(report.warnings.join("; "))));
    }
    report.complete = report.failure.is_none();
    let exit_code = report.failure.as_ref().map_or(0, |f| f.exit_code);
    RunOutcome {
        report,
        timings,
        bundle,
        exit_code,
    }
}

/// Runs the pipeline and writes report, plot data, charts, timings and the
/// best model under `cfg.out`. Returns the exit status.
pub fn run_and_write(cfg: &RunConfig, out: &Path) -> CliResult<i32> {
    let outcome = run(cfg);
    output::ensure_dir(out)?;
    output::write_json(&out.join("report.json"), &outcome.report)?;
    output::write_json(&out.join("timings.json"), &outcome.timings)?;
    output::write_plots(&outcome.report, out, cfg.svg)?;
    if let Some(b) = &outcome.bundle {
        output::write_json(&out.join("model.json"), b)?;
    }
    if let Some(f) = &outcome.report.failure {
        eprintln!("tabkit: stage {} failed: {}", f.stage, f.message);
    }
    Ok(outcome.exit_code)
}
