//! Stratified k-fold partitioning.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Splits `0..y.len()` into `k` folds with per-class counts within one of
/// proportional. Each class is shuffled on its own stream, the two
/// shuffled lists are concatenated and position `i` goes to fold `i mod k`.
/// Indices inside a fold are sorted.
pub fn stratified_kfold(y: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    let mut order = Vec::with_capacity(y.len());
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if idx.len() < k {
            return Err(Error::ClassTooSmall {
                class,
                count: idx.len(),
                folds: k,
            });
        }
        SplitMix64::stream(seed, u64::from(class)).shuffle(&mut idx);
        order.extend(idx);
    }
    if order.len() != y.len() {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// `(train, held_out)` index pairs, one per fold.
pub fn kfold_splits(y: &[u8], k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let folds = stratified_kfold(y, k, seed)?;
    Ok((0..k)
        .map(|f| {
            let mut train: Vec<usize> = (0..k)
                .filter(|&g| g != f)
                .flat_map(|g| folds[g].iter().copied())
                .collect();
            train.sort_unstable();
            (train, folds[f].clone())
        })
        .collect())
}
