use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_tabkit");

struct Run {
    code: i32,
    stderr: String,
}

fn tabkit(args: &[&str]) -> Run {
    let out = Command::new(BIN).args(args).output().expect("spawn tabkit");
    Run {
        code: out.status.code().expect("exit code"),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn numbers(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(n) => out.push(n.as_f64().unwrap()),
        Value::Array(a) => a.iter().for_each(|x| numbers(x, out)),
        Value::Object(o) => o.values().for_each(|x| numbers(x, out)),
        _ => {}
    }
}

/// Small grids so a full run takes a couple of seconds.
const FAST: &[&str] = &[
    "--set",
    "predict.grid.logreg=penalty=l1,l2;C=0.1,1",
    "--set",
    "predict.grid.tree=max_depth=3,None;ccp_alpha=0.0,0.01",
    "--set",
    "predict.grid.forest=n_estimators=10;max_depth=4;max_features=sqrt;random_state=21",
    "--set",
    "predict.grid.knn=n_neighbors=3,7",
    "--set",
    "predict.grid.svm=C=1;gamma=scale,auto",
    "--set",
    "predict.shap_instances=5",
];

fn synth(dir: &Path) -> (PathBuf, PathBuf) {
    let d = dir.join("data");
    assert_eq!(tabkit(&["synth", "--kind", "social", "--n", "200", "--seed", "7", "--out", s(&d)]).code, 0);
    assert_eq!(tabkit(&["synth", "--kind", "grad", "--n", "240", "--seed", "42", "--out", s(&d)]).code, 0);
    (d.join("social.csv"), d.join("grad.csv"))
}

fn fast_pipeline(social: &Path, grad: &Path, out: &Path, extra: &[&str]) -> Run {
    let seg = format!("segment.input={}", s(social));
    let pred = format!("predict.input={}", s(grad));
    let mut args = vec!["pipeline", "--out", s(out), "--set", &seg, "--set", &pred];
    args.extend_from_slice(FAST);
    args.extend_from_slice(extra);
    tabkit(&args)
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(tabkit(&["--help"]).code, 0);
    assert_eq!(tabkit(&["--version"]).code, 0);
    assert_eq!(tabkit(&["pca", "--help"]).code, 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(tabkit(&["--no-such-flag", "describe", "x.csv"]).code, 1);
    assert_eq!(tabkit(&[]).code, 1);
    assert_eq!(tabkit(&["synth", "--kind", "other", "--n", "3"]).code, 1);
    let r = tabkit(&["pipeline", "--set", "predict.bogus=1"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("predict.bogus"), "{}", r.stderr);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "seed = 3\nsegment.colour = red\n").unwrap();
    assert_eq!(tabkit(&["pipeline", "--config", s(&cfg)]).code, 1);
    // Prediction selected without an input.
    assert_eq!(tabkit(&["pipeline", "--set", "pipeline=prediction"]).code, 1);
}

#[test]
fn missing_file_exits_data() {
    let dir = tempfile::tempdir().unwrap();
    let r = tabkit(&["describe", s(&dir.path().join("absent.csv")), "--out", s(dir.path())]);
    assert_eq!(r.code, 2);
    assert_eq!(r.stderr.lines().count(), 1, "{}", r.stderr);
}

#[test]
fn ragged_csv_exits_data() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("ragged.csv");
    fs::write(&f, "a,b\n1,2\n3\n").unwrap();
    assert_eq!(tabkit(&["describe", s(&f), "--out", s(dir.path())]).code, 2);
}

#[test]
fn single_class_label_aborts_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("one.csv");
    let mut text = String::from("x,z,y\n");
    for i in 0..30 {
        text.push_str(&format!("{i},{},yes\n", i % 7));
    }
    fs::write(&f, text).unwrap();
    let out = dir.path().join("out");
    let input = format!("predict.input={}", s(&f));
    let r = tabkit(&[
        "pipeline",
        "--out",
        s(&out),
        "--set",
        "pipeline=prediction",
        "--set",
        &input,
        "--set",
        "predict.label=y",
    ]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let rep = json(&out.join("report.json"));
    assert_eq!(rep["complete"], false);
    assert_eq!(rep["failure"]["stage"], "prediction.prepare");
    assert_eq!(rep["failure"]["exit_code"], 2);
    // Stages that ran before the failure are kept.
    assert_eq!(rep["prediction"]["input"]["rows_read"], 30);
}

#[test]
fn evaluate_predictions_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("pred.csv");
    let mut text = String::from("y_true,y_pred\n");
    for (t, p, n) in [(0, 0, 36), (0, 1, 8), (1, 0, 3), (1, 1, 18)] {
        for _ in 0..n {
            text.push_str(&format!("{t},{p}\n"));
        }
    }
    fs::write(&f, text).unwrap();
    let r = tabkit(&["evaluate", "--predictions", s(&f), "--out", s(dir.path())]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let ev = json(&dir.path().join("evaluation.json"));
    assert_eq!(ev["rows"], 65);
    assert_eq!(ev["evaluation"]["accuracy"].as_f64().unwrap(), 54.0 / 65.0);
    assert!(ev["evaluation"]["auc"].is_null());
    assert_eq!(
        fs::read_to_string(dir.path().join("confusion.csv")).unwrap(),
        "actual,predicted_0,predicted_1\n0,36,8\n1,3,18\n"
    );
    // Labels other than 0/1 are a data error.
    fs::write(&f, "y_true,y_pred\n0,2\n").unwrap();
    assert_eq!(tabkit(&["evaluate", "--predictions", s(&f), "--out", s(dir.path())]).code, 2);
}

#[test]
fn plot_data_comes_from_the_report_and_runs_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let (social, grad) = synth(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let r = fast_pipeline(&social, &grad, &a, &["--threads", "1", "--svg"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(fast_pipeline(&social, &grad, &b, &["--threads", "3"]).code, 0);
    let ra = fs::read(a.join("report.json")).unwrap();
    assert_eq!(ra, fs::read(b.join("report.json")).unwrap());

    let rep = json(&a.join("report.json"));
    assert_eq!(rep["complete"], true);
    let mut known = Vec::new();
    numbers(&rep, &mut known);
    let csvs = [
        "scree.csv",
        "silhouette.csv",
        "elbow.csv",
        "loadings.csv",
        "tuning_curves.csv",
        "confusion_val.csv",
        "confusion_test.csv",
        "shap_summary.csv",
        "cluster_means.csv",
    ];
    for name in csvs {
        let mut rd = csv::Reader::from_path(a.join(name)).unwrap();
        let mut cells = 0;
        for rec in rd.records() {
            for cell in rec.unwrap().iter() {
                if let Ok(v) = cell.parse::<f64>() {
                    assert!(known.contains(&v), "{name}: {v} is not in the report");
                    cells += 1;
                }
            }
        }
        assert!(cells > 0, "{name} has no numbers");
    }
    for name in ["scree.svg", "silhouette.svg", "elbow.svg", "shap_summary.svg"] {
        let text = fs::read_to_string(a.join(name)).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"), "{name}");
    }
    assert!(!b.join("scree.svg").exists());
    let timings = json(&a.join("timings.json"));
    assert!(timings["stages"].as_array().unwrap().len() >= 10);
    // A different seed changes the report.
    let c = dir.path().join("c");
    assert_eq!(fast_pipeline(&social, &grad, &c, &["--seed", "5"]).code, 0);
    assert_ne!(ra, fs::read(c.join("report.json")).unwrap());
}

#[test]
fn train_evaluate_explain_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (_, grad) = synth(dir.path());
    let out = dir.path().join("train");
    let r = tabkit(&["train", s(&grad), "--model", "logreg", "--grid", "C=0.1,1", "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let model = out.join("model.json");
    let ev_dir = dir.path().join("eval");
    let r = tabkit(&["evaluate", s(&grad), "--model", s(&model), "--out", s(&ev_dir)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let ev = json(&ev_dir.join("evaluation.json"));
    assert_eq!(ev["rows"], 240);
    assert!(ev["evaluation"]["accuracy"].as_f64().unwrap() > 0.6);
    let ex_dir = dir.path().join("explain");
    let r = tabkit(&[
        "explain",
        s(&grad),
        "--model",
        s(&model),
        "--out",
        s(&ex_dir),
        "--set",
        "predict.shap_instances=4",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = json(&ex_dir.join("report.json"));
    let entries = rep["prediction"]["shap"]["summary"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), rep["prediction"]["features"].as_array().unwrap().len());
    assert!(ex_dir.join("shap_summary.csv").exists());
    // A model file from elsewhere is rejected as data.
    fs::write(&model, "{\"format_version\": 99}").unwrap();
    assert_eq!(tabkit(&["evaluate", s(&grad), "--model", s(&model), "--out", s(&ev_dir)]).code, 2);
}

#[test]
fn segmentation_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let (social, _) = synth(dir.path());
    let out = dir.path().join("seg");
    assert_eq!(tabkit(&["describe", s(&social), "--out", s(&out)]).code, 0);
    let d = json(&out.join("describe.json"));
    assert_eq!(d["rows"], 200);
    assert_eq!(tabkit(&["preprocess", s(&social), "--out", s(&out)]).code, 0);
    assert!(out.join("features.csv").exists());
    assert_eq!(tabkit(&["pca", s(&social), "--k", "3", "--out", s(&out)]).code, 0);
    let rep = json(&out.join("report.json"));
    assert_eq!(rep["segmentation"]["pca"]["k_retained"], 3);
    let header = fs::read_to_string(out.join("scores.csv")).unwrap();
    assert!(header.starts_with("PC1,PC2,PC3\n"));
    assert_eq!(tabkit(&["pca", s(&social), "--k", "3", "--variance", "0.9"]).code, 1);
    assert_eq!(tabkit(&["selectk", s(&social), "--out", s(&out)]).code, 0);
    let rep = json(&out.join("report.json"));
    assert_eq!(rep["segmentation"]["k_selection"]["scores"].as_array().unwrap().len(), 7);
    assert_eq!(tabkit(&["cluster", s(&social), "--k", "3", "--out", s(&out)]).code, 0);
    let labels = fs::read_to_string(out.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 201);
    let rep = json(&out.join("report.json"));
    assert_eq!(rep["segmentation"]["kmeans"]["k"], 3);
}

#[test]
fn strict_promotes_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let (_, grad) = synth(dir.path());
    let out = dir.path().join("gs");
    let grid = "penalty=l2;C=1,10;max_iter=1,2000";
    let r = tabkit(&["gridsearch", s(&grad), "--model", "logreg", "--grid", grid, "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("warning"), "{}", r.stderr);
    let r = tabkit(&["gridsearch", s(&grad), "--model", "logreg", "--grid", grid, "--out", s(&out), "--strict"]);
    assert_eq!(r.code, 3, "{}", r.stderr);
}
