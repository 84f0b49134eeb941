//! Files written under the output directory: JSON documents, plot-data
//! CSVs derived from the report, and optional SVG charts.

use std::fs;
use std::path::Path;

use serde::Serialize;
use tabkit_core::modelsel::ConfusionMatrix;

use crate::error::{CliError, CliResult};
use crate::report::RunReport;
use crate::svg;

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline. Field order follows the struct
/// definitions, so the layout is stable.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// A CSV cell: shortest round-trip decimal, blank for missing or
/// non-finite values (which the JSON report holds as null).
pub fn num(v: f64) -> String {
    if !v.is_finite() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), num)
}

pub struct CsvDoc {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_text(path, &self.render())
    }
}

pub fn confusion_csv(cm: &ConfusionMatrix) -> CsvDoc {
    let mut d = CsvDoc::new(&["actual", "predicted_0", "predicted_1"]);
    d.push(vec!["0".into(), cm.tn.to_string(), cm.fp.to_string()]);
    d.push(vec!["1".into(), cm.fn_.to_string(), cm.tp.to_string()]);
    d
}

/// Every plot-data CSV the report supports, keyed by file name.
pub fn plot_tables(report: &RunReport) -> Vec<(&'static str, CsvDoc)> {
    let mut out = Vec::new();
    if let Some(seg) = &report.segmentation {
        if let Some(pca) = &seg.pca {
            let mut d = CsvDoc::new(&["component", "eigenvalue", "ratio", "cumulative"]);
            for s in &pca.scree {
                d.push(vec![s.component.to_string(), num(s.eigenvalue), num(s.ratio), num(s.cumulative)]);
            }
            out.push(("scree.csv", d));
            let l = &pca.loadings;
            let mut header = vec!["feature".to_string()];
            header.extend(l.components.iter().cloned());
            let mut d = CsvDoc::new(&header);
            for (f, row) in l.features.iter().zip(&l.values) {
                let mut r = vec![f.clone()];
                r.extend(row.iter().map(|&v| num(v)));
                d.push(r);
            }
            out.push(("loadings.csv", d));
        }
        if let Some(ks) = &seg.k_selection {
            let mut sil = CsvDoc::new(&["k", "silhouette"]);
            let mut elbow = CsvDoc::new(&["k", "inertia"]);
            for s in &ks.scores {
                sil.push(vec![s.k.to_string(), num(s.silhouette)]);
                elbow.push(vec![s.k.to_string(), num(s.inertia)]);
            }
            out.push(("silhouette.csv", sil));
            out.push(("elbow.csv", elbow));
        }
        if let Some(cm) = &seg.cluster_means {
            let mut header = vec!["cluster".to_string(), "size".to_string()];
            header.extend(cm.features.iter().cloned());
            let mut d = CsvDoc::new(&header);
            for c in &cm.clusters {
                let mut r = vec![c.cluster.to_string(), c.size.to_string()];
                r.extend(c.means.iter().map(|&v| num(v)));
                d.push(r);
            }
            out.push(("cluster_means.csv", d));
        }
    }
    if let Some(pred) = &report.prediction {
        if !pred.models.is_empty() {
            let mut d = CsvDoc::new(&["model", "index", "train_score", "val_score", "train_loss", "val_loss"]);
            for m in &pred.models {
                for t in &m.tuning_curve {
                    d.push(vec![
                        m.kind.to_string(),
                        t.index.to_string(),
                        opt(t.train_score),
                        num(t.val_score),
                        opt(t.train_loss),
                        opt(t.val_loss),
                    ]);
                }
            }
            out.push(("tuning_curves.csv", d));
        }
        if let Some(best) = pred.best_model.and_then(|k| pred.models.iter().find(|m| m.kind == k)) {
            out.push(("confusion_val.csv", confusion_csv(&best.validation.confusion)));
            out.push(("confusion_test.csv", confusion_csv(&best.test.confusion)));
        }
        if let Some(shap) = &pred.shap {
            let mut d = CsvDoc::new(&["feature", "mean_abs_shap"]);
            for e in &shap.summary.entries {
                d.push(vec![e.name.clone(), num(e.mean_abs)]);
            }
            out.push(("shap_summary.csv", d));
        }
    }
    out
}

pub fn write_plots(report: &RunReport, dir: &Path, with_svg: bool) -> CliResult<()> {
    for (name, doc) in plot_tables(report) {
        doc.write(&dir.join(name))?;
    }
    if with_svg {
        for (name, chart) in svg::charts(report) {
            write_text(&dir.join(name), &chart)?;
        }
    }
    Ok(())
}
