//! K-means (k-means++ seeding, Lloyd iterations, best of several restarts),
//! silhouette scoring and silhouette-driven choice of k.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::rng::SplitMix64;
use crate::tabular::Table;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            n_init: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    /// k × d.
    pub centroids: Matrix,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub seed: u64,
    /// Restart that produced this model.
    pub restart: usize,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k()];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }
}

/// Outcome of one Lloyd run from fixed initial centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub centroids: Matrix,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Inertia after the initial assignment and after every iteration.
    pub history: Vec<f64>,
}

/// Nearest centroid per row (ties to the lowest index) and the total
/// squared distance.
pub fn assign(z: &Matrix, centroids: &Matrix) -> (Vec<usize>, f64) {
    let mut labels = Vec::with_capacity(z.rows());
    let mut inertia = 0.0;
    for row in z.row_iter() {
        let (best, d) = nearest(row, centroids);
        labels.push(best);
        inertia += d;
    }
    (labels, inertia)
}

fn nearest(row: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for j in 0..centroids.rows() {
        let d = sq_dist(row, centroids.row(j));
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (best, best_d)
}

/// Index of the next k-means++ center given those already chosen: uniform
/// when none are chosen, otherwise proportional to squared distance to the
/// closest chosen center.
pub fn kmeans_pp_next(z: &Matrix, chosen: &[usize], rng: &mut SplitMix64) -> usize {
    let n = z.rows();
    if chosen.is_empty() {
        return rng.below(n);
    }
    let d2: Vec<f64> = z
        .row_iter()
        .map(|r| {
            chosen
                .iter()
                .map(|&c| sq_dist(r, z.row(c)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let total: f64 = d2.iter().sum();
    if total <= 0.0 {
        // Every point coincides with a chosen center; pick among the rest.
        let rest: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
        return if rest.is_empty() {
            rng.below(n)
        } else {
            rest[rng.below(rest.len())]
        };
    }
    let target = rng.next_f64() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &d) in d2.iter().enumerate() {
        if d > 0.0 {
            last_positive = i;
            acc += d;
            if acc > target {
                return i;
            }
        }
    }
    last_positive
}

pub fn kmeans_plus_plus(z: &Matrix, k: usize, rng: &mut SplitMix64) -> Matrix {
    let mut chosen = Vec::with_capacity(k);
    while chosen.len() < k {
        let next = kmeans_pp_next(z, &chosen, rng);
        chosen.push(next);
    }
    z.select_rows(&chosen)
}

// Means of the assigned points. An empty cluster takes the point farthest
// from its own cluster's mean (among clusters with more than one member).
fn update_centroids(z: &Matrix, labels: &mut [usize], k: usize) -> Matrix {
    let d = z.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (row, &l) in z.row_iter().zip(labels.iter()) {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(row) {
            *s += v;
        }
    }
    let mean_of = |sums: &Matrix, counts: &[usize], j: usize| -> Vec<f64> {
        sums.row(j).iter().map(|s| s / counts[j] as f64).collect()
    };
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let means: Vec<Option<Vec<f64>>> = (0..k)
            .map(|c| (counts[c] > 0).then(|| mean_of(&sums, &counts, c)))
            .collect();
        let mut far = None;
        let mut far_d = -1.0;
        for (i, row) in z.row_iter().enumerate() {
            let l = labels[i];
            if counts[l] < 2 {
                continue;
            }
            let dist = sq_dist(row, means[l].as_ref().expect("nonempty cluster"));
            if dist > far_d {
                far_d = dist;
                far = Some(i);
            }
        }
        let Some(i) = far else { break };
        let donor = labels[i];
        let row = z.row(i);
        for (s, v) in sums.row_mut(donor).iter_mut().zip(row) {
            *s -= v;
        }
        counts[donor] -= 1;
        sums.row_mut(j).copy_from_slice(row);
        counts[j] = 1;
        labels[i] = j;
    }
    let mut c = Matrix::zeros(k, d);
    for j in 0..k {
        if counts[j] > 0 {
            let m = mean_of(&sums, &counts, j);
            c.row_mut(j).copy_from_slice(&m);
        }
    }
    c
}

/// Lloyd iterations from `init`. Stops when the assignment no longer changes
/// (centroids are then exactly the cluster means), when the largest
/// centroid move is below `tol`, or after `max_iter` updates.
pub fn lloyd(z: &Matrix, init: Matrix, max_iter: usize, tol: f64) -> LloydRun {
    let k = init.rows();
    let mut centroids = init;
    let (mut labels, mut inertia) = assign(z, &centroids);
    let mut history = vec![inertia];
    let mut n_iter = 0;
    let mut converged = false;
    for it in 1..=max_iter {
        let mut working = labels.clone();
        let next = update_centroids(z, &mut working, k);
        let shift = (0..k)
            .map(|j| sq_dist(next.row(j), centroids.row(j)).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        let (new_labels, new_inertia) = assign(z, &centroids);
        debug_assert!(
            new_inertia <= inertia + 1e-9 * inertia.max(1.0),
            "lloyd inertia increased: {inertia} -> {new_inertia}"
        );
        history.push(new_inertia);
        n_iter = it;
        let changed = new_labels != working;
        labels = new_labels;
        inertia = new_inertia;
        if !changed || shift < tol {
            converged = true;
            break;
        }
    }
    LloydRun {
        centroids,
        labels,
        inertia,
        n_iter,
        converged,
        history,
    }
}

/// One restart: k-means++ seeding from stream `restart` of `seed`, then Lloyd.
pub fn kmeans_restart(z: &Matrix, k: usize, seed: u64, restart: usize, params: &KMeansParams) -> LloydRun {
    let mut rng = SplitMix64::stream(seed, restart as u64);
    let init = kmeans_plus_plus(z, k, &mut rng);
    lloyd(z, init, params.max_iter, params.tol)
}

/// Best of `n_init` restarts by inertia; ties go to the lower restart index.
pub fn kmeans_fit(z: &Matrix, k: usize, seed: u64, params: &KMeansParams) -> Result<KMeansModel> {
    let n = z.rows();
    if n == 0 || z.cols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let runs: Vec<LloydRun> = (0..params.n_init.max(1))
        .into_par_iter()
        .map(|r| kmeans_restart(z, k, seed, r, params))
        .collect();
    let (restart, best) = runs
        .into_iter()
        .enumerate()
        .reduce(|a, b| if b.1.inertia < a.1.inertia { b } else { a })
        .expect("at least one restart");
    Ok(KMeansModel {
        centroids: best.centroids,
        labels: best.labels,
        inertia: best.inertia,
        n_iter: best.n_iter,
        converged: best.converged,
        seed,
        restart,
    })
}

/// Per-point silhouette values `(b − a) / max(a, b)`; members of singleton
/// clusters score 0.
pub fn silhouette_samples(z: &Matrix, labels: &[usize]) -> Result<Vec<f64>> {
    let n = z.rows();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, found: n });
    }
    let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_clusters];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::SingleCluster);
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; n_clusters];
            let zi = z.row(i);
            for (j, row) in z.row_iter().enumerate() {
                if j != i {
                    sums[labels[j]] += sq_dist(zi, row).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..n_clusters)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect())
}

pub fn silhouette(z: &Matrix, labels: &[usize]) -> Result<f64> {
    let s = silhouette_samples(z, labels)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub inertia: f64,
    pub silhouette: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionReport {
    pub scores: Vec<KScore>,
    /// Maximizes mean silhouette; ties go to the smaller k.
    pub chosen_k: usize,
}

pub fn select_k(z: &Matrix, k_min: usize, k_max: usize, seed: u64, params: &KMeansParams) -> Result<KSelectionReport> {
    let n = z.rows();
    if k_min < 2 || k_min > k_max || k_max + 1 > n {
        return Err(Error::InvalidParameter(format!(
            "k range [{k_min}, {k_max}] must satisfy 2 <= k_min <= k_max <= n - 1 (n = {n})"
        )));
    }
    let mut scores = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let m = kmeans_fit(z, k, seed, params)?;
        let s = silhouette(z, &m.labels)?;
        scores.push(KScore {
            k,
            inertia: m.inertia,
            silhouette: s,
        });
    }
    let chosen_k = scores
        .iter()
        .fold(None::<&KScore>, |best, s| match best {
            Some(b) if b.silhouette >= s.silhouette => Some(b),
            _ => Some(s),
        })
        .map(|s| s.k)
        .expect("nonempty range");
    Ok(KSelectionReport { scores, chosen_k })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster: usize,
    pub size: usize,
    /// Per-feature mean, aligned with [`ClusterMeans::features`].
    pub means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMeans {
    pub features: Vec<String>,
    pub clusters: Vec<ClusterProfile>,
}

/// Mean of every numeric column of `original` within each cluster.
pub fn characterize(labels: &[usize], original: &Table) -> Result<ClusterMeans> {
    if labels.len() != original.n_rows() {
        return Err(Error::RowMismatch {
            expected: original.n_rows(),
            found: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let features = original.numeric_column_names();
    let mut clusters: Vec<ClusterProfile> = (0..k)
        .map(|c| ClusterProfile {
            cluster: c,
            size: labels.iter().filter(|&&l| l == c).count(),
            means: Vec::with_capacity(features.len()),
        })
        .collect();
    for name in &features {
        let col = original.column(name)?.as_numeric().expect("numeric");
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (v, &l) in col.iter().zip(labels) {
            if let Some(v) = v {
                sums[l] += v;
                counts[l] += 1;
            }
        }
        for c in 0..k {
            clusters[c].means.push(if counts[c] > 0 {
                sums[c] / counts[c] as f64
            } else {
                f64::NAN
            });
        }
    }
    Ok(ClusterMeans { features, clusters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Column;

    fn blobs() -> Matrix {
        Matrix::from_rows(&[
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.1],
            [0.1, 0.1],
            [10.0, 10.0],
            [10.1, 10.0],
            [10.0, 10.1],
        ])
        .unwrap()
    }

    #[test]
    fn k1_gives_column_means() {
        let z = blobs();
        let m = kmeans_fit(&z, 1, 0, &KMeansParams::default()).unwrap();
        let means = z.column_means();
        assert!((m.centroids[(0, 0)] - means[0]).abs() < 1e-12);
        let tss: f64 = z.row_iter().map(|r| sq_dist(r, &means)).sum();
        assert!((m.inertia - tss).abs() < 1e-9);
    }

    #[test]
    fn k_equals_n_zero_inertia() {
        let z = blobs();
        let m = kmeans_fit(&z, z.rows(), 5, &KMeansParams::default()).unwrap();
        assert!(m.inertia.abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let z = blobs();
        assert!(matches!(kmeans_fit(&z, 8, 0, &KMeansParams::default()), Err(Error::KTooLarge { .. })));
        assert!(matches!(silhouette(&z, &[0; 7]), Err(Error::SingleCluster)));
        let two = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(silhouette(&two, &[0, 1]), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn empty_cluster_repaired() {
        // Three initial centroids, one far from everything.
        let z = Matrix::from_rows(&[[0.0], [1.0], [2.0], [10.0]]).unwrap();
        let init = Matrix::from_rows(&[[0.5], [10.0], [100.0]]).unwrap();
        let run = lloyd(&z, init, 100, 1e-6);
        let mut sizes = [0; 3];
        for &l in &run.labels {
            sizes[l] += 1;
        }
        assert!(sizes.iter().all(|&s| s > 0), "{sizes:?}");
        assert!(run.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn separated_blobs_silhouette() {
        let z = blobs();
        let labels = [0, 0, 0, 0, 1, 1, 1];
        let s = silhouette(&z, &labels).unwrap();
        assert!(s > 0.9 && s <= 1.0);
    }

    #[test]
    fn characterize_weighted_identity() {
        let t = Table::new(
            "t",
            vec![
                Column::dense("a", &[1.0, 2.0, 3.0, 10.0]),
                Column::categorical("c", &[Some("x"), Some("y"), Some("x"), Some("y")]),
            ],
        )
        .unwrap();
        let cm = characterize(&[0, 0, 1, 1], &t).unwrap();
        assert_eq!(cm.features, vec!["a"]);
        assert_eq!(cm.clusters[0].means, vec![1.5]);
        assert_eq!(cm.clusters[1].means, vec![6.5]);
        assert!(matches!(characterize(&[0, 1], &t), Err(Error::RowMismatch { .. })));
        let one = characterize(&[0; 4], &t).unwrap();
        assert_eq!(one.clusters[0].means, vec![4.0]);
    }
}
