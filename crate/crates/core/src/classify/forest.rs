//! Random forest: bootstrap-resampled trees with per-node feature
//! subsampling, combined by majority vote.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{build_tree, ClassWeight, Criterion, MaxFeatures, Splitter, TreeData, TreeModel, TreeParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub criterion: Criterion,
    pub class_weight: ClassWeight,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            criterion: Criterion::Gini,
            class_weight: ClassWeight::None,
            seed: 21,
        }
    }
}

impl ForestParams {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            criterion: self.criterion,
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            max_features: self.max_features,
            max_leaf_nodes: None,
            min_impurity_decrease: 0.0,
            splitter: Splitter::Best,
            class_weight: self.class_weight,
            ccp_alpha: 0.0,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_features: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub seed: u64,
    pub trees: Vec<TreeModel>,
}

impl ForestModel {
    pub fn votes(&self, row: &[f64]) -> usize {
        self.trees.iter().filter(|t| t.predict_unchecked(row) == 1).count()
    }

    /// Majority vote; a tie goes to class 0.
    pub fn predict_unchecked(&self, row: &[f64]) -> u8 {
        u8::from(2 * self.votes(row) > self.trees.len())
    }

    /// Fraction of trees voting for class 1.
    pub fn score_unchecked(&self, row: &[f64]) -> f64 {
        self.votes(row) as f64 / self.trees.len() as f64
    }
}

pub fn forest_fit(x: &Matrix, y: &[u8], params: &ForestParams) -> Result<ForestModel> {
    let data = TreeData::new(x, y)?;
    forest_fit_on(&data, params)
}

/// Tree `t` draws from its own stream `(seed, t)`, so the forest does not
/// depend on how trees are scheduled across threads.
pub fn forest_fit_on(data: &TreeData, params: &ForestParams) -> Result<ForestModel> {
    if params.n_estimators == 0 {
        return Err(Error::InvalidParameter("n_estimators must be >= 1".into()));
    }
    let tp = params.tree_params();
    let n = data.n_rows();
    if !params.bootstrap && tp.max_features.resolve(data.n_features()) >= data.n_features() {
        // No resampling and no feature sampling: every tree is the same.
        let tree = build_tree(data, None, &tp, &mut SplitMix64::stream(params.seed, 0))?;
        return Ok(ForestModel {
            n_features: data.n_features(),
            bootstrap: params.bootstrap,
            max_features: params.max_features,
            seed: params.seed,
            trees: vec![tree; params.n_estimators],
        });
    }
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = SplitMix64::stream(params.seed, t as u64);
            if params.bootstrap {
                let mut mult = vec![0u32; n];
                for _ in 0..n {
                    mult[rng.below(n)] += 1;
                }
                build_tree(data, Some(&mult), &tp, &mut rng)
            } else {
                build_tree(data, None, &tp, &mut rng)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        n_features: data.n_features(),
        bootstrap: params.bootstrap,
        max_features: params.max_features,
        seed: params.seed,
        trees,
    })
}
