//! One function per subcommand. Each writes `report.json` (same schema as
//! the pipeline, holding only the stages it ran) plus its own files.

use std::path::{Path, PathBuf};

use serde::Serialize;
use tabkit_core::classify::ModelKind;
use tabkit_core::cluster::select_k;
use tabkit_core::modelsel::{confusion, metric_panel, ParamGrid};
use tabkit_core::pca::ComponentSelection;
use tabkit_core::synth::{gen_grad, gen_social, GradSynthSpec, SocialSynthSpec};
use tabkit_core::tabular::{audit, describe, save_csv};
use tabkit_core::{Error, Matrix};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{self, num, CsvDoc};
use crate::pipeline::{self, stage_seed};
use crate::prepare::{load, ModelBundle};
use crate::report::{Environment, PredictionReport, RunReport, SegmentationReport};

fn report(cfg: &RunConfig) -> RunReport {
    RunReport {
        environment: Environment::new(cfg.seed),
        config: cfg.clone(),
        complete: true,
        failure: None,
        warnings: Vec::new(),
        segmentation: None,
        prediction: None,
    }
}

/// Writes the report and its plot data; with `--strict`, warnings fail.
fn finish(cfg: &RunConfig, rep: &RunReport) -> CliResult<()> {
    output::ensure_dir(&cfg.out)?;
    output::write_json(&cfg.out.join("report.json"), rep)?;
    output::write_plots(rep, &cfg.out, cfg.svg)?;
    for w in &rep.warnings {
        eprintln!("tabkit: warning: {w}");
    }
    if cfg.strict && !rep.warnings.is_empty() {
        return Err(CliError::Strict(rep.warnings.join("; ")));
    }
    Ok(())
}

fn matrix_csv(names: &[String], x: &Matrix) -> CsvDoc {
    let mut d = CsvDoc::new(names);
    for i in 0..x.rows() {
        d.push(x.row(i).iter().map(|&v| num(v)).collect());
    }
    d
}

#[derive(Serialize)]
struct DescribeOut {
    rows: usize,
    audit: tabkit_core::tabular::AuditReport,
    describe: Vec<tabkit_core::tabular::ColumnSummary>,
}

pub fn describe_cmd(cfg: &RunConfig, input: &Path) -> CliResult<()> {
    let t = load(input)?;
    let out = DescribeOut {
        rows: t.n_rows(),
        audit: audit(&t),
        describe: describe(&t)?,
    };
    output::ensure_dir(&cfg.out)?;
    output::write_json(&cfg.out.join("describe.json"), &out)?;
    let mut d = CsvDoc::new(&["column", "count", "mean", "std", "min", "q1", "median", "q3", "max", "skewness"]);
    for s in &out.describe {
        d.push(vec![
            s.column.clone(),
            s.count.to_string(),
            num(s.mean),
            num(s.std),
            num(s.min),
            num(s.q1),
            num(s.median),
            num(s.q3),
            num(s.max),
            num(s.skewness),
        ]);
    }
    d.write(&cfg.out.join("describe.csv"))
}

fn segment_setup(cfg: &mut RunConfig, input: &Path) -> CliResult<(RunReport, SegmentationReport, pipeline::SegmentData)> {
    cfg.segment.input = Some(input.to_path_buf());
    let t = load(input)?;
    let mut seg = SegmentationReport::default();
    let d = pipeline::segment_data(&t, &cfg.segment, &mut seg)?;
    Ok((report(cfg), seg, d))
}

/// Fits the segmentation preparation and writes the feature matrix.
pub fn preprocess_cmd(mut cfg: RunConfig, input: &Path) -> CliResult<()> {
    let (mut rep, seg, d) = segment_setup(&mut cfg, input)?;
    output::ensure_dir(&cfg.out)?;
    matrix_csv(&d.pre.features, &d.z).write(&cfg.out.join("features.csv"))?;
    output::write_json(&cfg.out.join("preprocessor.json"), &d.pre)?;
    rep.segmentation = Some(seg);
    finish(&cfg, &rep)
}

pub fn pca_select(k: Option<usize>, variance: Option<f64>) -> CliResult<Option<ComponentSelection>> {
    match (k, variance) {
        (Some(_), Some(_)) => Err(CliError::Usage("--k and --variance are exclusive".into())),
        (Some(k), None) => Ok(Some(ComponentSelection::FixedK(k))),
        (None, Some(v)) => Ok(Some(ComponentSelection::VarianceTarget(v))),
        (None, None) => Ok(None),
    }
}

fn scores_csv(proj: &Matrix) -> CsvDoc {
    let names: Vec<String> = (1..=proj.cols()).map(|j| format!("PC{j}")).collect();
    matrix_csv(&names, proj)
}

pub fn pca_cmd(mut cfg: RunConfig, input: &Path, select: Option<ComponentSelection>) -> CliResult<()> {
    if let Some(s) = select {
        cfg.segment.pca = s;
    }
    let (mut rep, mut seg, d) = segment_setup(&mut cfg, input)?;
    let proj = pipeline::segment_pca(&d, cfg.segment.pca, &mut seg)?;
    output::ensure_dir(&cfg.out)?;
    scores_csv(&proj).write(&cfg.out.join("scores.csv"))?;
    rep.segmentation = Some(seg);
    finish(&cfg, &rep)
}

pub fn selectk_cmd(mut cfg: RunConfig, input: &Path) -> CliResult<()> {
    let (mut rep, mut seg, d) = segment_setup(&mut cfg, input)?;
    let proj = pipeline::segment_pca(&d, cfg.segment.pca, &mut seg)?;
    let s = &cfg.segment;
    seg.k_selection = Some(select_k(&proj, s.k_min, s.k_max, stage_seed(cfg.seed, "kmeans"), &s.kmeans)?);
    rep.segmentation = Some(seg);
    finish(&cfg, &rep)
}

/// k-means on the PCA scores; without `k`, the silhouette choice is used.
pub fn cluster_cmd(mut cfg: RunConfig, input: &Path, k: Option<usize>) -> CliResult<()> {
    let (mut rep, mut seg, d) = segment_setup(&mut cfg, input)?;
    let proj = pipeline::segment_pca(&d, cfg.segment.pca, &mut seg)?;
    let s = &cfg.segment;
    let seed = stage_seed(cfg.seed, "kmeans");
    let k = match k {
        Some(k) => k,
        None => {
            let ks = select_k(&proj, s.k_min, s.k_max, seed, &s.kmeans)?;
            let k = ks.chosen_k;
            seg.k_selection = Some(ks);
            k
        }
    };
    let labels = pipeline::segment_kmeans(&d, &proj, k, s, seed, &mut seg)?;
    output::ensure_dir(&cfg.out)?;
    let mut doc = CsvDoc::new(&["row", "cluster"]);
    for (i, l) in labels.iter().enumerate() {
        doc.push(vec![i.to_string(), l.to_string()]);
    }
    doc.write(&cfg.out.join("labels.csv"))?;
    rep.segmentation = Some(seg);
    finish(&cfg, &rep)
}

fn model_grid(cfg: &RunConfig, kind: ModelKind, grid: Option<&str>) -> CliResult<ParamGrid> {
    match grid {
        Some(g) => g.parse().map_err(|e: Error| CliError::Usage(format!("--grid: {e}"))),
        None => cfg.predict.grid(kind),
    }
}

/// Grid search for one model kind; with `save`, also writes the bundle.
pub fn gridsearch_cmd(mut cfg: RunConfig, input: &Path, kind: ModelKind, grid: Option<&str>, save: bool) -> CliResult<()> {
    cfg.predict.input = Some(input.to_path_buf());
    cfg.predict.models = vec![kind];
    let grid = model_grid(&cfg, kind, grid)?;
    let t = load(input)?;
    let mut pred = PredictionReport::default();
    let d = pipeline::predict_data(&t, &cfg.predict, cfg.seed, &mut pred)?;
    let (m, model) = pipeline::search_model(kind, &grid, &d, &pipeline::cv_options(&cfg.predict, cfg.seed))?;
    let mut rep = report(&cfg);
    rep.warnings.extend(m.failure_warnings());
    pred.models.push(m);
    output::ensure_dir(&cfg.out)?;
    if save {
        pred.best_model = Some(kind);
        let bundle = ModelBundle::new(&cfg.predict.label, &d.labels, d.pre, model);
        output::write_json(&cfg.out.join("model.json"), &bundle)?;
    }
    rep.prediction = Some(pred);
    finish(&cfg, &rep)
}

#[derive(Serialize)]
struct EvaluateOut {
    source: String,
    rows: usize,
    evaluation: tabkit_core::modelsel::EvaluationReport,
}

/// `y_true,y_pred[,score]` rows of 0/1 labels.
fn read_predictions(path: &Path) -> CliResult<(Vec<u8>, Vec<u8>, Option<Vec<f64>>)> {
    let t = load(path)?;
    let col = |name: &str| -> CliResult<Vec<f64>> { Ok(t.numeric_matrix(&[name.to_string()])?.column(0)) };
    let bits = |name: &str| -> CliResult<Vec<u8>> {
        col(name)?
            .into_iter()
            .map(|v| match v {
                0.0 => Ok(0u8),
                1.0 => Ok(1u8),
                _ => Err(Error::InvalidParameter(format!("{name} holds {v}, expected 0 or 1")).into()),
            })
            .collect()
    };
    let scores = if t.column_index("score").is_some() { Some(col("score")?) } else { None };
    Ok((bits("y_true")?, bits("y_pred")?, scores))
}

pub fn evaluate_cmd(cfg: RunConfig, model: Option<&Path>, input: Option<&Path>, predictions: Option<&Path>) -> CliResult<()> {
    let (source, y, ev) = match (model, input, predictions) {
        (Some(m), Some(i), None) => {
            let bundle = ModelBundle::read(m)?;
            let t = load(i)?;
            let (x, warnings) = bundle.preprocessor.transform(&t, cfg.strict)?;
            for w in warnings {
                eprintln!("tabkit: warning: {w}");
            }
            let y = bundle.labels(&t)?;
            let ev = pipeline::evaluate_on(bundle.classifier(), &x, &y)?;
            (i.display().to_string(), y, ev)
        }
        (None, None, Some(p)) => {
            let (y, pred, scores) = read_predictions(p)?;
            let cm = confusion(&y, &pred)?;
            let ev = match scores {
                Some(s) => metric_panel(&cm, &y, &s)?,
                None => {
                    // Without scores there is no ranking to compute AUC from.
                    let hard: Vec<f64> = pred.iter().map(|&v| v as f64).collect();
                    let mut ev = metric_panel(&cm, &y, &hard)?;
                    ev.auc = None;
                    ev
                }
            };
            (p.display().to_string(), y, ev)
        }
        _ => {
            return Err(CliError::Usage(
                "evaluate takes either --model with an input file or --predictions".into(),
            ))
        }
    };
    output::ensure_dir(&cfg.out)?;
    output::confusion_csv(&ev.confusion).write(&cfg.out.join("confusion.csv"))?;
    output::write_json(
        &cfg.out.join("evaluation.json"),
        &EvaluateOut {
            source,
            rows: y.len(),
            evaluation: ev,
        },
    )
}

/// SHAP summary of a stored model over the rows of `input`, which serve as
/// both background and explained instances.
pub fn explain_cmd(cfg: RunConfig, model: &Path, input: &Path) -> CliResult<()> {
    let bundle = ModelBundle::read(model)?;
    let t = load(input)?;
    let (x, warnings) = bundle.preprocessor.transform(&t, cfg.strict)?;
    let mut rep = report(&cfg);
    rep.warnings = warnings;
    let shap = pipeline::shap_report(
        bundle.classifier(),
        &x,
        &x,
        &bundle.preprocessor.features,
        &cfg.predict,
        cfg.seed,
    )?;
    rep.prediction = Some(PredictionReport {
        features: bundle.preprocessor.features.clone(),
        shap: Some(shap),
        ..PredictionReport::default()
    });
    finish(&cfg, &rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    Social,
    Grad,
}

pub fn synth_cmd(cfg: &RunConfig, kind: SynthKind, n: usize) -> CliResult<PathBuf> {
    let (t, name) = match kind {
        SynthKind::Social => (gen_social(&SocialSynthSpec::new(n, cfg.seed))?, "social.csv"),
        SynthKind::Grad => (gen_grad(&GradSynthSpec::new(n, cfg.seed))?, "grad.csv"),
    };
    output::ensure_dir(&cfg.out)?;
    let path = cfg.out.join(name);
    save_csv(&t, &path)?;
    Ok(path)
}
