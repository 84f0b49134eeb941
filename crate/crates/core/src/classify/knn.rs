//! k-nearest-neighbour classifier over a stored training set.

use serde::{Deserialize, Serialize};

use super::check_training_data;
use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Manhattan,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => sq_dist(a, b).sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub weighting: Weighting,
    pub metric: Metric,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            k: 5,
            weighting: Weighting::Uniform,
            metric: Metric::Euclidean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub k: usize,
    pub weighting: Weighting,
    pub metric: Metric,
}

pub fn knn_fit(x: &Matrix, y: &[u8], params: &KnnParams) -> Result<KnnModel> {
    check_training_data(x, y)?;
    if params.k == 0 || params.k > x.rows() {
        return Err(Error::InvalidParameter(format!(
            "k = {} must lie in 1..={}",
            params.k,
            x.rows()
        )));
    }
    Ok(KnnModel {
        x: x.clone(),
        y: y.to_vec(),
        k: params.k,
        weighting: params.weighting,
        metric: params.metric,
    })
}

/// Tally of the k nearest neighbours.
struct Vote {
    /// Per-class vote weight.
    weight: [f64; 2],
    /// Per-class summed distance.
    distance: [f64; 2],
}

impl KnnModel {
    /// The k nearest training rows as `(distance, index)`, nearest first;
    /// equal distances are ordered by training index.
    pub fn neighbors(&self, row: &[f64]) -> Vec<(f64, usize)> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .row_iter()
            .enumerate()
            .map(|(i, r)| (self.metric.distance(r, row), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d
    }

    fn vote(&self, row: &[f64]) -> Vote {
        let nb = self.neighbors(row);
        let mut v = Vote {
            weight: [0.0; 2],
            distance: [0.0; 2],
        };
        let exact = nb.iter().any(|(d, _)| *d == 0.0);
        for &(d, i) in &nb {
            let c = self.y[i] as usize;
            v.distance[c] += d;
            v.weight[c] += match self.weighting {
                Weighting::Uniform => 1.0,
                // Zero-distance neighbours outvote every other neighbour.
                Weighting::Distance if exact => f64::from(u8::from(d == 0.0)),
                Weighting::Distance => 1.0 / d,
            };
        }
        v
    }

    /// Larger vote wins; ties go to the class with the smaller summed
    /// distance, then to class 0.
    pub fn predict_unchecked(&self, row: &[f64]) -> u8 {
        let v = self.vote(row);
        if v.weight[1] != v.weight[0] {
            return u8::from(v.weight[1] > v.weight[0]);
        }
        u8::from(v.distance[1] < v.distance[0])
    }

    /// Weighted fraction of neighbour votes for class 1.
    pub fn score_unchecked(&self, row: &[f64]) -> f64 {
        let v = self.vote(row);
        let total = v.weight[0] + v.weight[1];
        if total > 0.0 {
            v.weight[1] / total
        } else {
            0.0
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<u8> {
        super::check_row(self.x.cols(), row)?;
        Ok(self.predict_unchecked(row))
    }
}
