//! Soft-margin SVM with an RBF kernel, trained by SMO with second-order
//! working-set selection.
//!
//! Labels are `{0, 1}` outside this module and `{-1, +1}` inside.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::check_training_data;
use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::stats;

const TAU: f64 = 1e-12;
/// Above this many rows the kernel is evaluated row by row.
const DENSE_KERNEL_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRule {
    /// `1 / (p · var(x))`, variance over every entry of x.
    Scale,
    /// `1 / p`.
    Auto,
    Value(f64),
}

impl GammaRule {
    pub fn resolve(self, x: &Matrix) -> f64 {
        let p = x.cols().max(1) as f64;
        match self {
            GammaRule::Scale => {
                let var = stats::population_variance(x.as_slice());
                if var > 0.0 {
                    1.0 / (p * var)
                } else {
                    1.0
                }
            }
            GammaRule::Auto => 1.0 / p,
            GammaRule::Value(g) => g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: GammaRule,
    pub tol: f64,
    /// Iteration cap; `None` means `max(10_000_000, 100·n)`.
    pub max_iter: Option<usize>,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: GammaRule::Scale,
            tol: 1e-3,
            max_iter: None,
        }
    }
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * sq_dist(a, b)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Matrix,
    /// `α_i · y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub intercept: f64,
    pub c: f64,
    pub gamma_rule: GammaRule,
    pub gamma: f64,
    pub n_iter: usize,
    pub converged: bool,
}

impl SvmModel {
    pub fn decision_unchecked(&self, row: &[f64]) -> f64 {
        self.support_vectors
            .row_iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * rbf(self.gamma, sv, row))
            .sum::<f64>()
            + self.intercept
    }

    pub fn decision(&self, row: &[f64]) -> Result<f64> {
        super::check_row(self.support_vectors.cols(), row)?;
        Ok(self.decision_unchecked(row))
    }
}

/// Full dual solution, including points that did not become support vectors.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub model: SvmModel,
    pub alpha: Vec<f64>,
    /// Labels in `{-1, +1}`.
    pub y_signed: Vec<f64>,
    /// Dual objective `Σα − ½ αᵀQα` after each iteration.
    pub dual_history: Vec<f64>,
    /// Final maximal violating pair gap `m(α) − M(α)`.
    pub gap: f64,
}

enum Kernel<'a> {
    Dense { n: usize, k: Vec<f64> },
    Lazy { x: &'a Matrix, gamma: f64 },
}

impl Kernel<'_> {
    fn row(&self, i: usize) -> Cow<'_, [f64]> {
        match self {
            Kernel::Dense { n, k } => Cow::Borrowed(&k[i * n..(i + 1) * n]),
            Kernel::Lazy { x, gamma } => {
                let xi = x.row(i);
                Cow::Owned(x.row_iter().map(|r| rbf(*gamma, xi, r)).collect())
            }
        }
    }
}

pub fn svm_fit(x: &Matrix, y: &[u8], params: &SvmParams) -> Result<SvmModel> {
    svm_fit_traced(x, y, params).map(|s| s.model)
}

pub fn svm_fit_traced(x: &Matrix, y: &[u8], params: &SvmParams) -> Result<SmoSolution> {
    let counts = check_training_data(x, y)?;
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    let gamma = params.gamma.resolve(x);
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let n = x.rows();
    let c = params.c;
    let ys: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    let kernel = if n <= DENSE_KERNEL_LIMIT {
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = 1.0;
            for j in 0..i {
                let v = rbf(gamma, x.row(i), x.row(j));
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        Kernel::Dense { n, k }
    } else {
        Kernel::Lazy { x, gamma }
    };
    let max_iter = params.max_iter.unwrap_or((100 * n).max(10_000_000));

    let mut alpha = vec![0.0; n];
    // Gradient of ½αᵀQα − eᵀα, Q_ij = y_i y_j K_ij.
    let mut grad = vec![-1.0; n];
    let mut history = vec![0.0];
    let up = |a: f64, yv: f64| if yv > 0.0 { a < c } else { a > 0.0 };
    let low = |a: f64, yv: f64| if yv > 0.0 { a > 0.0 } else { a < c };
    let mut iter = 0;
    let mut converged = false;
    let mut gap;

    loop {
        // i: maximal −y_t G_t over I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if up(alpha[t], ys[t]) {
                let v = -ys[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        if i_sel != usize::MAX {
            let ki = kernel.row(i_sel);
            for t in 0..n {
                if !low(alpha[t], ys[t]) {
                    continue;
                }
                let v = -ys[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let a = 2.0 - 2.0 * ki[t];
                    let a = if a > 0.0 { a } else { TAU };
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = t;
                    }
                }
            }
        }
        gap = gmax - gmin;
        if gap < params.tol || j_sel == usize::MAX {
            converged = true;
            break;
        }
        if iter >= max_iter {
            break;
        }
        iter += 1;

        let (i, j) = (i_sel, j_sel);
        let ki = kernel.row(i).into_owned();
        let kj = kernel.row(j);
        let qij = ys[i] * ys[j] * ki[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if ys[i] != ys[j] {
            let quad = (2.0 + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let di = (ai - old_i) * ys[i];
        let dj = (aj - old_j) * ys[j];
        for t in 0..n {
            grad[t] += ys[t] * (ki[t] * di + kj[t] * dj);
        }
        history.push(dual_objective(&alpha, &grad));
    }

    let intercept = -rho(&alpha, &grad, &ys, c);
    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let model = SvmModel {
        support_vectors: x.select_rows(&sv),
        dual_coef: sv.iter().map(|&t| alpha[t] * ys[t]).collect(),
        intercept,
        c,
        gamma_rule: params.gamma,
        gamma,
        n_iter: iter,
        converged,
    };
    Ok(SmoSolution {
        model,
        alpha,
        y_signed: ys,
        dual_history: history,
        gap,
    })
}

/// `Σα − ½αᵀQα`, using `Qα = G + e`.
fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

/// Offset `ρ` with decision `f(x) = Σ α_i y_i K(x_i, x) − ρ`: the mean of
/// `y_t G_t` over free vectors, or the midpoint of the feasible interval.
fn rho(alpha: &[f64], grad: &[f64], ys: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_diagonal_is_one() {
        assert_eq!(rbf(0.7, &[1.0, -2.0], &[1.0, -2.0]), 1.0);
    }

    #[test]
    fn two_points_split_at_midpoint() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [2.0, 1.0]]).unwrap();
        for c in [0.1, 1.0, 10.0] {
            let m = svm_fit(&x, &[0, 1], &SvmParams { c, gamma: GammaRule::Value(0.5), ..Default::default() }).unwrap();
            assert!(m.decision(&[1.0, 0.5]).unwrap().abs() < 1e-9);
            let a = m.decision(&[0.0, 0.0]).unwrap();
            let b = m.decision(&[2.0, 1.0]).unwrap();
            assert!((a + b).abs() < 1e-9);
            assert!(a < 0.0 && b > 0.0);
        }
    }

    #[test]
    fn dual_feasibility_and_monotone_objective() {
        let rows: Vec<[f64; 2]> = (0..30).map(|i| [(i as f64 * 0.37).sin() * 2.0, (i as f64 * 0.91).cos()]).collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] * r[1] > 0.0)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let s = svm_fit_traced(&x, &y, &SvmParams { c: 10.0, ..Default::default() }).unwrap();
        assert!(s.model.converged);
        let c = 10.0;
        assert!(s.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        let balance: f64 = s.alpha.iter().zip(&s.y_signed).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-6);
        for w in s.dual_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn gamma_rules() {
        let x = Matrix::from_rows(&[[0.0, 2.0], [2.0, 0.0]]).unwrap();
        assert_eq!(GammaRule::Auto.resolve(&x), 0.5);
        // All entries {0, 2, 2, 0}: variance 1.
        assert_eq!(GammaRule::Scale.resolve(&x), 0.5);
    }
}
