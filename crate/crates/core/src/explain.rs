//! Shapley-value attributions with an interventional value function:
//! `v(S)` is the mean model output over background rows with the features
//! in `S` replaced by the instance's values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SplitMix64;

/// Largest feature count accepted by [`shap_exact`].
pub const MAX_EXACT_FEATURES: usize = 12;

/// A real-valued model output.
pub type ModelFn<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ShapMethod {
    Exact,
    Sampled { permutations: usize },
}

impl ShapMethod {
    /// Exact enumeration when `p` allows it, permutation sampling otherwise.
    pub fn for_features(p: usize, permutations: usize) -> Self {
        if p <= MAX_EXACT_FEATURES {
            ShapMethod::Exact
        } else {
            ShapMethod::Sampled { permutations }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    /// Mean model output over the background.
    pub base_value: f64,
    /// Model output on the instance.
    pub output: f64,
    pub values: Vec<f64>,
    pub method: ShapMethod,
}

fn check(background: &Matrix, x: &[f64]) -> Result<()> {
    if background.rows() == 0 {
        return Err(Error::EmptyBackground);
    }
    if background.cols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: background.cols(),
            found: x.len(),
        });
    }
    Ok(())
}

fn mean_output(f: &ModelFn, rows: &Matrix) -> f64 {
    rows.row_iter().map(f).sum::<f64>() / rows.rows() as f64
}

/// Exact Shapley values by enumerating all `2^p` coalitions.
pub fn shap_exact(f: &ModelFn, background: &Matrix, x: &[f64]) -> Result<ShapExplanation> {
    check(background, x)?;
    let p = x.len();
    if p > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures {
            p,
            max: MAX_EXACT_FEATURES,
        });
    }
    let full = 1usize << p;
    let v: Vec<f64> = (0..full)
        .into_par_iter()
        .map(|mask| {
            let mut row = vec![0.0; p];
            let mut total = 0.0;
            for b in background.row_iter() {
                for j in 0..p {
                    row[j] = if mask >> j & 1 == 1 { x[j] } else { b[j] };
                }
                total += f(&row);
            }
            total / background.rows() as f64
        })
        .collect();
    // weight[s] = s! (p - s - 1)! / p!
    let mut weight = vec![0.0; p.max(1)];
    for (s, w) in weight.iter_mut().enumerate().take(p) {
        *w = 1.0 / (p as f64 * binomial(p - 1, s));
    }
    let mut values = vec![0.0; p];
    for (j, phi) in values.iter_mut().enumerate() {
        let bit = 1usize << j;
        for mask in (0..full).filter(|m| m & bit == 0) {
            *phi += weight[mask.count_ones() as usize] * (v[mask | bit] - v[mask]);
        }
    }
    Ok(ShapExplanation {
        base_value: v[0],
        output: v[full - 1],
        values,
        method: ShapMethod::Exact,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Permutation-sampling estimate. Permutation `r` is drawn from stream
/// `(seed, r)`; contributions are summed in permutation order.
pub fn shap_sample(
    f: &ModelFn,
    background: &Matrix,
    x: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<ShapExplanation> {
    check(background, x)?;
    if permutations == 0 {
        return Err(Error::InvalidParameter("need at least one permutation".into()));
    }
    let p = x.len();
    let base = mean_output(f, background);
    let per_perm: Vec<Vec<f64>> = (0..permutations)
        .into_par_iter()
        .map(|r| {
            let mut rng = SplitMix64::stream(seed, r as u64);
            let mut order: Vec<usize> = (0..p).collect();
            rng.shuffle(&mut order);
            let mut rows = background.clone();
            let mut prev = base;
            let mut phi = vec![0.0; p];
            for &j in &order {
                for i in 0..rows.rows() {
                    rows[(i, j)] = x[j];
                }
                let cur = mean_output(f, &rows);
                phi[j] = cur - prev;
                prev = cur;
            }
            phi
        })
        .collect();
    let mut values = vec![0.0; p];
    for phi in &per_perm {
        for (v, d) in values.iter_mut().zip(phi) {
            *v += d;
        }
    }
    for v in &mut values {
        *v /= permutations as f64;
    }
    Ok(ShapExplanation {
        base_value: base,
        output: f(x),
        values,
        method: ShapMethod::Sampled { permutations },
    })
}

pub fn shap_explain(
    f: &ModelFn,
    background: &Matrix,
    x: &[f64],
    method: ShapMethod,
    seed: u64,
) -> Result<ShapExplanation> {
    match method {
        ShapMethod::Exact => shap_exact(f, background, x),
        ShapMethod::Sampled { permutations } => shap_sample(f, background, x, permutations, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummaryEntry {
    pub feature: usize,
    pub name: String,
    pub mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub method: ShapMethod,
    pub n_instances: usize,
    pub n_background: usize,
    /// Descending by `mean_abs`; equal values keep feature order.
    pub entries: Vec<ShapSummaryEntry>,
}

impl ShapSummary {
    pub fn top(&self, n: usize) -> Vec<usize> {
        self.entries.iter().take(n).map(|e| e.feature).collect()
    }
}

/// Mean `|φ_j|` over `instances`. Every instance uses the same seed.
pub fn shap_summary(
    f: &ModelFn,
    background: &Matrix,
    instances: &Matrix,
    names: &[String],
    method: ShapMethod,
    seed: u64,
) -> Result<ShapSummary> {
    if instances.rows() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let p = instances.cols();
    if names.len() != p {
        return Err(Error::LengthMismatch {
            expected: p,
            found: names.len(),
        });
    }
    let mut sums = vec![0.0; p];
    for row in instances.row_iter() {
        let e = shap_explain(f, background, row, method, seed)?;
        for (s, v) in sums.iter_mut().zip(&e.values) {
            *s += v.abs();
        }
    }
    let n = instances.rows() as f64;
    let mut entries: Vec<ShapSummaryEntry> = sums
        .into_iter()
        .enumerate()
        .map(|(j, s)| ShapSummaryEntry {
            feature: j,
            name: names[j].clone(),
            mean_abs: s / n,
        })
        .collect();
    entries.sort_by(|a, b| b.mean_abs.total_cmp(&a.mean_abs).then(a.feature.cmp(&b.feature)));
    Ok(ShapSummary {
        method,
        n_instances: instances.rows(),
        n_background: background.rows(),
        entries,
    })
}

/// Up to `max_rows` distinct rows of `x`, chosen by `seed`, in row order.
pub fn background_sample(x: &Matrix, max_rows: usize, seed: u64) -> Matrix {
    if x.rows() <= max_rows {
        return x.clone();
    }
    let mut idx = SplitMix64::new(seed).sample_indices(x.rows(), max_rows);
    idx.sort_unstable();
    x.select_rows(&idx)
}
