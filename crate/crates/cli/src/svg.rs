//! Minimal static SVG 1.1 charts: axes, a polyline or bars, and labels.

use std::fmt::Write;

use crate::report::RunReport;

const W: f64 = 480.0;
const H: f64 = 320.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn short(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn frame(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, esc(title));
    let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 10.0, esc(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(y_label)
    );
    s
}

fn y_range(ys: &[f64]) -> (f64, f64) {
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    if hi > lo { (lo, hi) } else { (lo, lo + 1.0) }
}

fn y_ticks(s: &mut String, lo: f64, hi: f64, sy: impl Fn(f64) -> f64) {
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>"#, LEFT - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, short(v));
    }
}

/// Line chart over labelled x positions.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, xs: &[String], ys: &[f64]) -> String {
    let mut s = frame(title, x_label, y_label);
    let finite: Vec<f64> = ys.iter().copied().filter(|v| v.is_finite()).collect();
    let (lo, hi) = y_range(&finite);
    let n = xs.len().max(1);
    let span = W - LEFT - RIGHT;
    let sx = |i: usize| LEFT + if n == 1 { span / 2.0 } else { span * i as f64 / (n - 1) as f64 };
    let sy = |v: f64| (H - BOTTOM) - (H - BOTTOM - TOP) * (v - lo) / (hi - lo);
    y_ticks(&mut s, lo, hi, sy);
    let mut pts = String::new();
    for (i, (x, &y)) in xs.iter().zip(ys).enumerate() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, sx(i), H - BOTTOM + 16.0, esc(x));
        if y.is_finite() {
            let _ = write!(pts, "{},{} ", sx(i), sy(y));
            let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="3" fill="steelblue"/>"#, sx(i), sy(y));
        }
    }
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, pts.trim_end());
    s.push_str("</svg>\n");
    s
}

/// Horizontal bar chart, one bar per label, top to bottom.
pub fn bar_chart(title: &str, value_label: &str, labels: &[String], values: &[f64]) -> String {
    let mut s = frame(title, value_label, "");
    let hi = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let hi = if hi > 0.0 { hi } else { 1.0 };
    let n = labels.len().max(1) as f64;
    let band = (H - BOTTOM - TOP) / n;
    let left = LEFT + 60.0;
    let span = W - left - RIGHT;
    for (i, (l, &v)) in labels.iter().zip(values).enumerate() {
        let y = TOP + band * i as f64;
        let w = if v.is_finite() { span * v.max(0.0) / hi } else { 0.0 };
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{}" width="{w}" height="{}" fill="steelblue"/>"#,
            y + band * 0.15,
            band * 0.7
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, left - 4.0, y + band * 0.5 + 4.0, esc(l));
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, left + w + 4.0, y + band * 0.5 + 4.0, short(v));
    }
    s.push_str("</svg>\n");
    s
}

pub fn charts(report: &RunReport) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    if let Some(seg) = &report.segmentation {
        if let Some(pca) = &seg.pca {
            let xs: Vec<String> = pca.scree.iter().map(|p| p.component.to_string()).collect();
            let ys: Vec<f64> = pca.scree.iter().map(|p| p.ratio).collect();
            out.push(("scree.svg", line_chart("Scree", "component", "variance ratio", &xs, &ys)));
        }
        if let Some(ks) = &seg.k_selection {
            let xs: Vec<String> = ks.scores.iter().map(|s| s.k.to_string()).collect();
            let sil: Vec<f64> = ks.scores.iter().map(|s| s.silhouette).collect();
            let inertia: Vec<f64> = ks.scores.iter().map(|s| s.inertia).collect();
            out.push(("silhouette.svg", line_chart("Silhouette", "k", "mean silhouette", &xs, &sil)));
            out.push(("elbow.svg", line_chart("Elbow", "k", "inertia", &xs, &inertia)));
        }
    }
    if let Some(shap) = report.prediction.as_ref().and_then(|p| p.shap.as_ref()) {
        let labels: Vec<String> = shap.summary.entries.iter().map(|e| e.name.clone()).collect();
        let values: Vec<f64> = shap.summary.entries.iter().map(|e| e.mean_abs).collect();
        out.push(("shap_summary.svg", bar_chart("Mean |SHAP|", "mean |SHAP|", &labels, &values)));
    }
    out
}
