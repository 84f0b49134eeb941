//! L1/L2-regularised logistic regression.
//!
//! Objective: `Σ_i logloss(y_i, wᵀx_i + b) + R(w)` with
//! `R = ‖w‖²/(2C)` or `‖w‖₁/C`; the bias is never penalised.

use serde::{Deserialize, Serialize};

use super::check_training_data;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub penalty: Penalty,
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            penalty: Penalty::L2,
            c: 1.0,
            max_iter: 2000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub penalty: Penalty,
    pub c: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Final objective value.
    pub objective: f64,
}

impl LogRegModel {
    pub fn decision_unchecked(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }

    pub fn predict_proba_unchecked(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision_unchecked(row))
    }

    pub fn predict_unchecked(&self, row: &[f64]) -> u8 {
        u8::from(self.decision_unchecked(row) > 0.0)
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        super::check_row(self.weights.len(), row)?;
        Ok(self.predict_proba_unchecked(row))
    }

    /// Number of weights that are exactly zero.
    pub fn sparsity(&self) -> usize {
        self.weights.iter().filter(|w| **w == 0.0).count()
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Negative log-likelihood of one sample with margin `t`.
pub fn log_loss(y: u8, t: f64) -> f64 {
    softplus(t) - if y == 1 { t } else { 0.0 }
}

fn penalty_value(w: &[f64], penalty: Penalty, c: f64) -> f64 {
    match penalty {
        Penalty::L2 => dot(w, w) / (2.0 * c),
        Penalty::L1 => w.iter().map(|v| v.abs()).sum::<f64>() / c,
    }
}

fn data_loss(w: &[f64], b: f64, x: &Matrix, y: &[u8]) -> f64 {
    x.row_iter()
        .zip(y)
        .map(|(r, &yi)| log_loss(yi, dot(w, r) + b))
        .sum()
}

/// Full objective value.
pub fn objective(w: &[f64], b: f64, x: &Matrix, y: &[u8], penalty: Penalty, c: f64) -> f64 {
    data_loss(w, b, x, y) + penalty_value(w, penalty, c)
}

/// Gradient of the data term only: `(∂/∂w, ∂/∂b)`.
fn data_gradient(w: &[f64], b: f64, x: &Matrix, y: &[u8]) -> (Vec<f64>, f64) {
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (r, &yi) in x.row_iter().zip(y) {
        let e = sigmoid(dot(w, r) + b) - f64::from(yi);
        for (g, v) in gw.iter_mut().zip(r) {
            *g += e * v;
        }
        gb += e;
    }
    (gw, gb)
}

/// Gradient of the full objective. For L1 the subgradient `sign(w_j)/C` is
/// used, which is the true gradient wherever no weight is zero.
pub fn objective_gradient(
    w: &[f64],
    b: f64,
    x: &Matrix,
    y: &[u8],
    penalty: Penalty,
    c: f64,
) -> (Vec<f64>, f64) {
    let (mut gw, gb) = data_gradient(w, b, x, y);
    for (g, v) in gw.iter_mut().zip(w) {
        *g += match penalty {
            Penalty::L2 => v / c,
            Penalty::L1 => {
                if *v == 0.0 {
                    0.0
                } else {
                    v.signum() / c
                }
            }
        };
    }
    (gw, gb)
}

fn norm(g: &[f64], gb: f64) -> f64 {
    (dot(g, g) + gb * gb).sqrt()
}

/// Fit result together with the objective after every accepted step.
#[derive(Debug, Clone)]
pub struct LogRegTrace {
    pub model: LogRegModel,
    pub objective_history: Vec<f64>,
}

pub fn logreg_fit(x: &Matrix, y: &[u8], params: &LogRegParams) -> Result<LogRegModel> {
    logreg_fit_traced(x, y, params).map(|t| t.model)
}

pub fn logreg_fit_traced(x: &Matrix, y: &[u8], params: &LogRegParams) -> Result<LogRegTrace> {
    let counts = check_training_data(x, y)?;
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    if !(params.tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    match params.penalty {
        Penalty::L2 => fit_l2(x, y, params),
        Penalty::L1 => fit_l1(x, y, params),
    }
}

/// Exact change of the data term for the step `s·d`, given the current
/// margins `t` and their directional derivatives `dt`. Each term is formed
/// from `s·dt` directly, so the result stays accurate when the change is
/// far below the rounding error of the objective itself.
fn data_change(t: &[f64], dt: &[f64], y: &[u8], s: f64) -> f64 {
    t.iter()
        .zip(dt)
        .zip(y)
        .map(|((&ti, &di), &yi)| {
            let delta = s * di;
            // softplus(t + δ) − softplus(t) = ln(1 + σ(t)·(e^δ − 1))
            let e = delta.exp_m1();
            let sp = if e.is_finite() {
                (sigmoid(ti) * e).ln_1p()
            } else {
                softplus(ti + delta) - softplus(ti)
            };
            sp - if yi == 1 { delta } else { 0.0 }
        })
        .sum()
}

/// `wd = w·d` and `dd = d·d` over the weights.
fn l2_change(t: &[f64], dt: &[f64], y: &[u8], s: f64, wd: f64, dd: f64, c: f64) -> f64 {
    data_change(t, dt, y, s) + (2.0 * s * wd + s * s * dd) / (2.0 * c)
}

/// Damped Newton with Armijo backtracking; the step falls back to the
/// negative gradient if the Hessian solve fails.
fn fit_l2(x: &Matrix, y: &[u8], params: &LogRegParams) -> Result<LogRegTrace> {
    let p = x.cols();
    let c = params.c;
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut f = objective(&w, b, x, y, Penalty::L2, c);
    let mut history = vec![f];
    let mut converged = false;
    let mut iters = 0;

    for it in 0..params.max_iter {
        iters = it;
        let (gw, gb) = objective_gradient(&w, b, x, y, Penalty::L2, c);
        let gnorm = norm(&gw, gb);
        if gnorm <= params.tol {
            converged = true;
            break;
        }
        // Hessian over (w, b), with b last.
        let d = p + 1;
        let mut h = Matrix::zeros(d, d);
        for r in x.row_iter() {
            let s = sigmoid(dot(&w, r) + b);
            let s = s * (1.0 - s);
            if s == 0.0 {
                continue;
            }
            for i in 0..p {
                let si = s * r[i];
                for j in i..p {
                    h[(i, j)] += si * r[j];
                }
                h[(i, p)] += si;
            }
            h[(p, p)] += s;
        }
        for i in 0..d {
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
        }
        for i in 0..p {
            h[(i, i)] += 1.0 / c;
        }
        let mut g: Vec<f64> = gw.clone();
        g.push(gb);
        let dir = match cholesky_solve(&h, &g) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s.into_iter().map(|v| -v).collect(),
            _ => g.iter().map(|v| -v).collect::<Vec<_>>(),
        };
        let slope = dot(&g, &dir);
        let dir: Vec<f64> = if slope < 0.0 { dir } else { g.iter().map(|v| -v).collect() };
        let slope = dot(&g, &dir);

        // Margins along the direction, so trial steps cost O(n).
        let margins: Vec<f64> = x.row_iter().map(|r| dot(&w, r) + b).collect();
        let dmargins: Vec<f64> = x.row_iter().map(|r| dot(&dir[..p], r) + dir[p]).collect();
        let wd = dot(&w, &dir[..p]);
        let dd = dot(&dir[..p], &dir[..p]);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let change = l2_change(&margins, &dmargins, y, step, wd, dd, c);
            if change <= 1e-4 * step * slope {
                for (a, d) in w.iter_mut().zip(&dir) {
                    *a += step * d;
                }
                b += step * dir[p];
                f += change;
                history.push(f);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            iters = it + 1;
            break;
        }
        iters = it + 1;
    }
    if !converged {
        let (gw, gb) = objective_gradient(&w, b, x, y, Penalty::L2, c);
        converged = norm(&gw, gb) <= params.tol;
    }
    Ok(LogRegTrace {
        model: LogRegModel {
            weights: w,
            bias: b,
            penalty: Penalty::L2,
            c,
            n_iter: iters,
            converged,
            objective: f,
        },
        objective_history: history,
    })
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Norm of the minimum-norm subgradient of the L1 objective; zero exactly
/// at the optimum.
fn l1_optimality(gw: &[f64], gb: f64, w: &[f64], c: f64) -> f64 {
    let lam = 1.0 / c;
    let mut s = gb * gb;
    for (g, v) in gw.iter().zip(w) {
        let r = if *v != 0.0 {
            g + v.signum() * lam
        } else {
            (g.abs() - lam).max(0.0)
        };
        s += r * r;
    }
    s.sqrt()
}

/// Proximal Newton: each outer step minimises the second-order model of
/// the data term plus the L1 penalty by cyclic coordinate descent, then
/// backtracks on the true objective. Stops when the minimum-norm
/// subgradient reaches `tol`.
fn fit_l1(x: &Matrix, y: &[u8], params: &LogRegParams) -> Result<LogRegTrace> {
    let (n, p) = (x.rows(), x.cols());
    let c = params.c;
    let lam = 1.0 / c;
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut f = objective(&w, b, x, y, Penalty::L1, c);
    let mut history = vec![f];
    let mut converged = false;
    let mut iters = 0;
    let mut margin = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut resid = vec![0.0; n];

    for it in 0..params.max_iter {
        iters = it;
        for (i, r) in x.row_iter().enumerate() {
            margin[i] = dot(&w, r) + b;
            let s = sigmoid(margin[i]);
            resid[i] = s - f64::from(y[i]);
            hess[i] = (s * (1.0 - s)).max(1e-12);
        }
        let mut gw = vec![0.0; p];
        for (r, e) in x.row_iter().zip(&resid) {
            for (g, v) in gw.iter_mut().zip(r) {
                *g += e * v;
            }
        }
        let gb: f64 = resid.iter().sum();
        if l1_optimality(&gw, gb, &w, c) <= params.tol {
            converged = true;
            break;
        }
        let diag: Vec<f64> = (0..p)
            .map(|j| x.row_iter().zip(&hess).map(|(r, h)| h * r[j] * r[j]).sum::<f64>() + 1e-12)
            .collect();
        let diag_b: f64 = hess.iter().sum();
        // Direction d over (w, b); xd = X d_w + d_b.
        let mut d = vec![0.0; p];
        let mut db = 0.0;
        let mut xd = vec![0.0; n];
        for _sweep in 0..100 {
            let mut max_step: f64 = 0.0;
            for j in 0..p {
                let grad_j = gw[j] + x.row_iter().zip(&hess).zip(&xd).map(|((r, h), q)| h * r[j] * q).sum::<f64>();
                let cur = w[j] + d[j];
                let next = soft_threshold(cur - grad_j / diag[j], lam / diag[j]);
                let delta = next - cur;
                if delta != 0.0 {
                    d[j] += delta;
                    for (q, r) in xd.iter_mut().zip(x.row_iter()) {
                        *q += delta * r[j];
                    }
                    max_step = max_step.max(delta.abs());
                }
            }
            let grad_b = gb + hess.iter().zip(&xd).map(|(h, q)| h * q).sum::<f64>();
            let delta = -grad_b / diag_b;
            if delta != 0.0 {
                db += delta;
                for q in &mut xd {
                    *q += delta;
                }
                max_step = max_step.max(delta.abs());
            }
            if max_step <= 1e-12 {
                break;
            }
        }
        if db == 0.0 && d.iter().all(|&v| v == 0.0) {
            break;
        }
        let l1_change = |s: f64| -> f64 { w.iter().zip(&d).map(|(v, dj)| (v + s * dj).abs() - v.abs()).sum() };
        let decrease = dot(&gw, &d) + gb * db + lam * l1_change(1.0);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let change = data_change(&margin, &xd, y, step) + lam * l1_change(step);
            if change <= 1e-4 * step * decrease {
                for (a, s) in w.iter_mut().zip(&d) {
                    *a += step * s;
                }
                b += step * db;
                f += change;
                history.push(f);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iters = it + 1;
        if !accepted {
            break;
        }
    }
    if !converged {
        let (gw, gb) = data_gradient(&w, b, x, y);
        converged = l1_optimality(&gw, gb, &w, c) <= params.tol;
    }
    Ok(LogRegTrace {
        model: LogRegModel {
            weights: w,
            bias: b,
            penalty: Penalty::L1,
            c,
            n_iter: iters,
            converged,
            objective: f,
        },
        objective_history: history,
    })
}
