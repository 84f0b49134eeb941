//! Principal component analysis on a symmetric Jacobi eigensolver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-8;

/// Sample covariance `XᵀX / (n − 1)` of `x` after centering each column.
pub fn covariance(x: &Matrix) -> Result<Matrix> {
    let (n, p) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, found: n });
    }
    let means = x.column_means();
    let mut centered = x.clone();
    for i in 0..n {
        for (v, m) in centered.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    debug_assert!(centered.column_means().iter().all(|m| m.abs() <= 1e-8 * (1.0 + means.iter().fold(0.0f64, |a, b| a.max(b.abs())))));
    let mut c = Matrix::zeros(p, p);
    for row in centered.row_iter() {
        for a in 0..p {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            for b in a..p {
                c[(a, b)] += ra * row[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..p {
        for b in a..p {
            let v = c[(a, b)] / denom;
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    Ok(c)
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`; its
    /// largest-magnitude entry is positive.
    pub vectors: Matrix,
    pub sweeps: usize,
}

fn max_off_diagonal(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut m = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// Cyclic Jacobi rotations until the largest off-diagonal entry is at most
/// `1e-12 · max(1, ‖C‖_F)`, or 100 sweeps.
pub fn eigh(c: &Matrix) -> Result<Eigen> {
    let n = c.rows();
    if c.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.cols(),
        });
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((c[(i, j)] - c[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL || c.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NotSymmetric { max_asymmetry: asym });
    }
    let mut a = c.clone();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let norm = a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = OFF_DIAGONAL_TOL * norm.max(1.0);
    let mut v = Matrix::identity(n);

    let mut sweeps = 0;
    loop {
        let off = max_off_diagonal(&a);
        if off <= tol {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                what: "jacobi eigensolver",
                residual: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                rotate(&mut a, &mut v, p, q, cs, sn);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let mut lead = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[lead].abs() {
                lead = i;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for (i, x) in col.iter().enumerate() {
            vectors[(i, k)] = sign * x;
        }
    }
    Ok(Eigen {
        values,
        vectors,
        sweeps,
    })
}

// A ← JᵀAJ and V ← VJ for the plane rotation in (p, q).
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentSelection {
    FixedK(usize),
    /// Smallest k whose cumulative explained-variance ratio reaches the target.
    VarianceTarget(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// p × K, columns are the retained unit eigenvectors.
    pub components: Matrix,
    /// All p eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// All p explained-variance ratios.
    pub explained_variance_ratio: Vec<f64>,
    pub k_retained: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreePoint {
    pub component: usize,
    pub eigenvalue: f64,
    pub ratio: f64,
    pub cumulative: f64,
}

/// Feature × component loading values (columns are unit vectors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingTable {
    pub features: Vec<String>,
    pub components: Vec<String>,
    /// `values[f][k]`: loading of feature `f` on component `k`.
    pub values: Vec<Vec<f64>>,
}

pub fn fit_pca(z: &Matrix, select: ComponentSelection) -> Result<PcaModel> {
    let p = z.cols();
    if p == 0 {
        return Err(Error::EmptyMatrix);
    }
    let k_fixed = match select {
        ComponentSelection::FixedK(k) if k == 0 || k > p => {
            return Err(Error::InvalidParameter(format!("k = {k} outside 1..={p}")))
        }
        ComponentSelection::VarianceTarget(f) if !(f > 0.0 && f <= 1.0) => {
            return Err(Error::InvalidParameter(format!("variance target {f} outside (0, 1]")))
        }
        ComponentSelection::FixedK(k) => Some(k),
        ComponentSelection::VarianceTarget(_) => None,
    };
    let c = covariance(z)?;
    let eig = eigh(&c)?;
    let clamped: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    let ratios: Vec<f64> = clamped
        .iter()
        .map(|&l| if total > 0.0 { l / total } else { 0.0 })
        .collect();
    let k = match (k_fixed, select) {
        (Some(k), _) => k,
        (None, ComponentSelection::VarianceTarget(target)) => {
            let mut cum = 0.0;
            let mut k = p;
            for (i, r) in ratios.iter().enumerate() {
                cum += r;
                if cum >= target - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k
        }
        _ => unreachable!(),
    };
    let idx: Vec<usize> = (0..k).collect();
    Ok(PcaModel {
        mean: z.column_means(),
        components: eig.vectors.select_cols(&idx),
        eigenvalues: eig.values,
        explained_variance_ratio: ratios,
        k_retained: k,
    })
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Scores `Z = (x − mean) · V_K`.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        let p = self.n_features();
        if x.cols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: x.cols(),
            });
        }
        let k = self.k_retained;
        let mut out = Matrix::zeros(x.rows(), k);
        for i in 0..x.rows() {
            let row = x.row(i);
            for c in 0..k {
                let mut s = 0.0;
                for j in 0..p {
                    s += (row[j] - self.mean[j]) * self.components[(j, c)];
                }
                out[(i, c)] = s;
            }
        }
        Ok(out)
    }

    /// `Z · V_Kᵀ + mean`.
    pub fn inverse_transform(&self, scores: &Matrix) -> Result<Matrix> {
        if scores.cols() != self.k_retained {
            return Err(Error::DimensionMismatch {
                expected: self.k_retained,
                found: scores.cols(),
            });
        }
        let mut out = scores.matmul(&self.components.transpose())?;
        for i in 0..out.rows() {
            for (v, m) in out.row_mut(i).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(out)
    }

    pub fn cumulative_variance(&self) -> f64 {
        self.explained_variance_ratio[..self.k_retained].iter().sum()
    }

    pub fn scree_data(&self) -> Vec<ScreePoint> {
        let mut cum = 0.0;
        self.eigenvalues
            .iter()
            .zip(&self.explained_variance_ratio)
            .enumerate()
            .map(|(i, (&eigenvalue, &ratio))| {
                cum += ratio;
                ScreePoint {
                    component: i + 1,
                    eigenvalue,
                    ratio,
                    cumulative: cum,
                }
            })
            .collect()
    }

    pub fn loadings(&self, feature_names: &[String]) -> Result<LoadingTable> {
        if feature_names.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: feature_names.len(),
            });
        }
        Ok(LoadingTable {
            features: feature_names.to_vec(),
            components: (1..=self.k_retained).map(|k| format!("PC{k}")).collect(),
            values: (0..self.n_features())
                .map(|f| (0..self.k_retained).map(|k| self.components[(f, k)]).collect())
                .collect(),
        })
    }
}
