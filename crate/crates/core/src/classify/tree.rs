//! CART decision tree for binary labels.
//!
//! Each feature keeps its sample positions in sorted order; a node owns the
//! same `[start, end)` range in every per-feature array, and a split stably
//! partitions that range, so no node ever re-sorts.
//!
//! Random draws at a node come from a generator keyed by the node's path
//! from the root. A node's split therefore does not depend on the growth
//! limits (depth, sample counts, impurity threshold, leaf budget), and any
//! limited tree is a truncation of the unlimited one; see
//! [`TreeModel::truncation_mask`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::check_training_data;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{mix64, SplitMix64};

const EPSILON: f64 = 10.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
    LogLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Log2,
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (p as f64).log2().floor() as usize,
        };
        k.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitter {
    Best,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    None,
    Balanced,
}

impl ClassWeight {
    /// Per-class weights; balanced gives `n / (2 · n_c)`.
    pub fn weights(self, counts: [usize; 2]) -> [f64; 2] {
        match self {
            ClassWeight::None => [1.0, 1.0],
            ClassWeight::Balanced => {
                let n = (counts[0] + counts[1]) as f64;
                let w = |c: usize| if c == 0 { 1.0 } else { n / (2.0 * c as f64) };
                [w(counts[0]), w(counts[1])]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub max_leaf_nodes: Option<usize>,
    pub min_impurity_decrease: f64,
    pub splitter: Splitter,
    pub class_weight: ClassWeight,
    pub ccp_alpha: f64,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            max_leaf_nodes: None,
            min_impurity_decrease: 0.0,
            splitter: Splitter::Best,
            class_weight: ClassWeight::None,
            ccp_alpha: 0.0,
            seed: 42,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParameter("min_samples_split must be >= 2".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidParameter("min_samples_leaf must be >= 1".into()));
        }
        if matches!(self.max_leaf_nodes, Some(n) if n < 2) {
            return Err(Error::InvalidParameter("max_leaf_nodes must be >= 2".into()));
        }
        if !(self.min_impurity_decrease >= 0.0) || !(self.ccp_alpha >= 0.0) {
            return Err(Error::InvalidParameter(
                "min_impurity_decrease and ccp_alpha must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Node impurity from (possibly weighted) class totals.
pub fn impurity(criterion: Criterion, counts: [f64; 2]) -> f64 {
    let total = counts[0] + counts[1];
    if total <= 0.0 {
        return 0.0;
    }
    let p0 = counts[0] / total;
    let p1 = counts[1] / total;
    match criterion {
        Criterion::Gini => 1.0 - p0 * p0 - p1 * p1,
        Criterion::Entropy => -(xlogx(p0) + xlogx(p1)) / std::f64::consts::LN_2,
        Criterion::LogLoss => -(xlogx(p0) + xlogx(p1)),
    }
}

fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Samples with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// `W_t/W · (I(t) − W_l/W_t · I(l) − W_r/W_t · I(r))`.
    pub impurity_decrease: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub depth: usize,
    pub n_samples: usize,
    pub class_counts: [usize; 2],
    pub weighted_counts: [f64; 2],
    pub impurity: f64,
    pub split: Option<Split>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn weight(&self) -> f64 {
        self.weighted_counts[0] + self.weighted_counts[1]
    }

    pub fn predicted_class(&self) -> u8 {
        u8::from(self.weighted_counts[1] > self.weighted_counts[0])
    }

    pub fn positive_fraction(&self) -> f64 {
        let w = self.weight();
        if w > 0.0 {
            self.weighted_counts[1] / w
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub n_features: usize,
    pub criterion: Criterion,
    /// Total sample weight at the root.
    pub total_weight: f64,
    /// Root first; every child index is larger than its parent's.
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = &self.nodes[i].split {
            i = if row[s.feature] <= s.threshold { s.left } else { s.right };
        }
        i
    }

    pub fn predict_unchecked(&self, row: &[f64]) -> u8 {
        self.nodes[self.leaf_index(row)].predicted_class()
    }

    pub fn score_unchecked(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_index(row)].positive_fraction()
    }

    pub fn predict(&self, row: &[f64]) -> Result<u8> {
        super::check_row(self.n_features, row)?;
        Ok(self.predict_unchecked(row))
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Minimal cost-complexity pruning: repeatedly collapse the weakest
    /// link while its effective alpha is `<= alpha`. `alpha = 0` leaves the
    /// tree untouched.
    pub fn pruned(&self, alpha: f64) -> TreeModel {
        if alpha <= 0.0 || self.nodes.len() == 1 {
            return self.clone();
        }
        self.collapsed(&self.prune_mask(alpha, vec![false; self.nodes.len()]))
    }

    /// Copy with the nodes flagged in `mask` turned into leaves and the
    /// unreachable nodes dropped.
    pub fn collapsed(&self, mask: &[bool]) -> TreeModel {
        let mut nodes = self.nodes.clone();
        for (node, &c) in nodes.iter_mut().zip(mask) {
            if c {
                node.split = None;
            }
        }
        TreeModel {
            n_features: self.n_features,
            criterion: self.criterion,
            total_weight: self.total_weight,
            nodes: compact(nodes),
        }
    }

    /// Extends `collapsed` (nodes already treated as leaves) with the nodes
    /// that pruning at `alpha` turns into leaves.
    pub fn prune_mask(&self, alpha: f64, mut collapsed: Vec<bool>) -> Vec<bool> {
        let n = self.nodes.len();
        if alpha <= 0.0 {
            return collapsed;
        }
        let total = self.total_weight;
        let risk: Vec<f64> = self.nodes.iter().map(|n| n.weight() / total * n.impurity).collect();
        let mut sub_risk = vec![0.0; n];
        let mut leaves = vec![0usize; n];
        let mut reachable = vec![false; n];
        loop {
            for i in (0..n).rev() {
                match &self.nodes[i].split {
                    Some(s) if !collapsed[i] => {
                        sub_risk[i] = sub_risk[s.left] + sub_risk[s.right];
                        leaves[i] = leaves[s.left] + leaves[s.right];
                    }
                    _ => {
                        sub_risk[i] = risk[i];
                        leaves[i] = 1;
                    }
                }
            }
            // Nodes below a collapsed node are unreachable; skip them.
            reachable.iter_mut().for_each(|r| *r = false);
            reachable[0] = true;
            let mut weakest: Option<(f64, usize)> = None;
            for i in 0..n {
                if !reachable[i] || collapsed[i] {
                    continue;
                }
                if let Some(s) = &self.nodes[i].split {
                    reachable[s.left] = true;
                    reachable[s.right] = true;
                    let g = (risk[i] - sub_risk[i]) / (leaves[i] - 1) as f64;
                    if weakest.is_none_or(|(best, _)| g < best) {
                        weakest = Some((g, i));
                    }
                }
            }
            match weakest {
                Some((g, i)) if g <= alpha => collapsed[i] = true,
                _ => break,
            }
        }
        collapsed
    }

    /// Nodes to collapse so that this tree, grown without limits, becomes
    /// the tree grown under `params` (same data, seed and split-selection
    /// settings). Only the growth limits of `params` are read.
    pub fn truncation_mask(&self, params: &TreeParams) -> Vec<bool> {
        let splittable = |i: usize| {
            let node = &self.nodes[i];
            node.split.as_ref().is_some_and(|s| {
                !params.max_depth.is_some_and(|d| node.depth >= d)
                    && node.n_samples >= params.min_samples_split
                    && s.impurity_decrease + EPSILON >= params.min_impurity_decrease
            })
        };
        let mut expanded = vec![false; self.nodes.len()];
        match params.max_leaf_nodes {
            None => {
                let mut stack = vec![0];
                while let Some(i) = stack.pop() {
                    if splittable(i) {
                        expanded[i] = true;
                        let s = self.nodes[i].split.as_ref().expect("split");
                        stack.push(s.left);
                        stack.push(s.right);
                    }
                }
            }
            Some(max_leaves) => {
                // Replays best-first growth, numbering nodes in the order a
                // direct build would create them so ties break the same way.
                let mut heap = BinaryHeap::new();
                let mut next_id = 1;
                let push = |heap: &mut BinaryHeap<Frontier>, i: usize, id: usize| {
                    if splittable(i) {
                        let s = self.nodes[i].split.as_ref().expect("split");
                        // `start` carries the node index here.
                        heap.push(Frontier {
                            decrease: s.impurity_decrease,
                            id,
                            start: i,
                            end: 0,
                        });
                    }
                };
                push(&mut heap, 0, 0);
                let mut leaves = 1;
                while leaves < max_leaves {
                    let Some(top) = heap.pop() else { break };
                    let i = top.start;
                    expanded[i] = true;
                    leaves += 1;
                    let s = self.nodes[i].split.as_ref().expect("split");
                    push(&mut heap, s.left, next_id);
                    push(&mut heap, s.right, next_id + 1);
                    next_id += 2;
                }
            }
        }
        self.nodes
            .iter()
            .zip(expanded)
            .map(|(n, e)| n.split.is_some() && !e)
            .collect()
    }

    /// For every node, the node whose class counts decide predictions for
    /// samples routed through it once the nodes in `collapsed` become
    /// leaves.
    pub fn effective_leaves(&self, collapsed: &[bool]) -> Vec<usize> {
        let mut rep: Vec<usize> = (0..self.nodes.len()).collect();
        for i in 0..self.nodes.len() {
            if let Some(s) = &self.nodes[i].split {
                if rep[i] != i || collapsed[i] {
                    rep[s.left] = rep[i];
                    rep[s.right] = rep[i];
                }
            }
        }
        rep
    }
}

/// Drops unreachable nodes, renumbering in preorder.
fn compact(nodes: Vec<Node>) -> Vec<Node> {
    let mut out: Vec<Node> = Vec::new();
    // (old index, slot in parent to patch)
    let mut stack: Vec<(usize, Option<(usize, bool)>)> = vec![(0, None)];
    while let Some((old, parent)) = stack.pop() {
        let new_id = out.len();
        if let Some((pid, is_left)) = parent {
            let s = out[pid].split.as_mut().expect("parent is internal");
            if is_left {
                s.left = new_id;
            } else {
                s.right = new_id;
            }
        }
        let node = nodes[old].clone();
        if let Some(s) = &node.split {
            stack.push((s.right, Some((new_id, false))));
            stack.push((s.left, Some((new_id, true))));
        }
        out.push(node);
    }
    out
}

/// Column-major copy of the training data with each feature presorted.
/// Building it once lets many fits share the sort.
#[derive(Debug, Clone)]
pub struct TreeData {
    n: usize,
    cols: Vec<Vec<f64>>,
    y: Vec<u8>,
    sorted: Vec<Vec<u32>>,
    class_counts: [usize; 2],
}

impl TreeData {
    pub fn new(x: &Matrix, y: &[u8]) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::EmptyInput);
        }
        let class_counts = check_training_data(x, y)?;
        let n = x.rows();
        let cols: Vec<Vec<f64>> = (0..x.cols()).map(|j| x.column(j)).collect();
        let sorted = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Ok(Self {
            n,
            cols,
            y: y.to_vec(),
            sorted,
            class_counts,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }
}

pub fn tree_fit(x: &Matrix, y: &[u8], params: &TreeParams) -> Result<TreeModel> {
    let data = TreeData::new(x, y)?;
    tree_fit_on(&data, params)
}

pub fn tree_fit_on(data: &TreeData, params: &TreeParams) -> Result<TreeModel> {
    let mut rng = SplitMix64::new(params.seed);
    let tree = build_tree(data, None, params, &mut rng)?;
    Ok(tree.pruned(params.ccp_alpha))
}

/// Grows an unpruned tree. `multiplicity` gives each row's bootstrap count.
pub(crate) fn build_tree(
    data: &TreeData,
    multiplicity: Option<&[u32]>,
    params: &TreeParams,
    rng: &mut SplitMix64,
) -> Result<TreeModel> {
    params.validate()?;
    let n = data.n;
    let mult: Vec<u32> = match multiplicity {
        Some(m) => {
            if m.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: m.len(),
                });
            }
            m.to_vec()
        }
        None => vec![1; n],
    };
    let cw = params.class_weight.weights(data.class_counts);
    let sw: Vec<f64> = (0..n)
        .map(|i| f64::from(mult[i]) * cw[data.y[i] as usize])
        .collect();
    let order: Vec<Vec<u32>> = data
        .sorted
        .iter()
        .map(|s| s.iter().copied().filter(|&r| mult[r as usize] > 0).collect())
        .collect();
    let m = order.first().map_or(n, |o| o.len());
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    let p = data.cols.len();
    let mut b = Builder {
        data,
        params,
        mult,
        sw,
        order,
        go_left: vec![false; n],
        buf: Vec::with_capacity(m),
        feats: (0..p).collect(),
        n_try: params.max_features.resolve(p),
        root_key: rng.next(),
        keys: Vec::new(),
        nodes: Vec::new(),
        total_weight: 0.0,
    };
    b.run(m);
    Ok(TreeModel {
        n_features: p,
        criterion: params.criterion,
        total_weight: b.total_weight,
        nodes: b.nodes,
    })
}

struct Candidate {
    feature: usize,
    threshold: f64,
    /// Number of samples in the left child.
    pos: usize,
    proxy: f64,
}

struct Plan {
    feature: usize,
    threshold: f64,
    mid: usize,
    left: ([usize; 2], [f64; 2]),
    right: ([usize; 2], [f64; 2]),
    decrease: f64,
}

struct Builder<'a> {
    data: &'a TreeData,
    params: &'a TreeParams,
    mult: Vec<u32>,
    sw: Vec<f64>,
    order: Vec<Vec<u32>>,
    go_left: Vec<bool>,
    buf: Vec<u32>,
    feats: Vec<usize>,
    n_try: usize,
    root_key: u64,
    /// Per-node generator keys, parallel to `nodes`.
    keys: Vec<u64>,
    nodes: Vec<Node>,
    total_weight: f64,
}

#[derive(PartialEq)]
struct Frontier {
    decrease: f64,
    id: usize,
    start: usize,
    end: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.decrease
            .total_cmp(&other.decrease)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Builder<'_> {
    fn counts(&self, rows: &[u32]) -> ([usize; 2], [f64; 2]) {
        let mut c = [0usize; 2];
        let mut w = [0.0f64; 2];
        for &r in rows {
            let r = r as usize;
            let k = self.data.y[r] as usize;
            c[k] += self.mult[r] as usize;
            w[k] += self.sw[r];
        }
        (c, w)
    }

    fn push_node(&mut self, depth: usize, key: u64, counts: ([usize; 2], [f64; 2])) -> usize {
        let (c, w) = counts;
        self.keys.push(key);
        self.nodes.push(Node {
            depth,
            n_samples: c[0] + c[1],
            class_counts: c,
            weighted_counts: w,
            impurity: impurity(self.params.criterion, w),
            split: None,
        });
        self.nodes.len() - 1
    }

    fn run(&mut self, m: usize) {
        let root_counts = self.counts(&self.order[0][..m]);
        self.total_weight = root_counts.1[0] + root_counts.1[1];
        let root = self.push_node(0, self.root_key, root_counts);
        match self.params.max_leaf_nodes {
            None => self.depth_first(root, m),
            Some(max_leaves) => self.best_first(root, m, max_leaves),
        }
    }

    fn depth_first(&mut self, root: usize, m: usize) {
        let mut stack = vec![(root, 0usize, m)];
        while let Some((id, start, end)) = stack.pop() {
            if let Some(plan) = self.plan(id, start, end) {
                let mid = plan.mid;
                let (l, r) = self.apply(id, start, end, plan);
                stack.push((r, mid, end));
                stack.push((l, start, mid));
            }
        }
    }

    fn best_first(&mut self, root: usize, m: usize, max_leaves: usize) {
        let mut heap = BinaryHeap::new();
        let mut plans: Vec<Option<Plan>> = Vec::new();
        self.consider(&mut heap, &mut plans, root, 0, m);
        let mut leaves = 1;
        while leaves < max_leaves {
            let Some(top) = heap.pop() else { break };
            let plan = plans[top.id].take().expect("planned node");
            let mid = plan.mid;
            let (l, r) = self.apply(top.id, top.start, top.end, plan);
            leaves += 1;
            self.consider(&mut heap, &mut plans, l, top.start, mid);
            self.consider(&mut heap, &mut plans, r, mid, top.end);
        }
    }

    fn consider(
        &mut self,
        heap: &mut BinaryHeap<Frontier>,
        plans: &mut Vec<Option<Plan>>,
        id: usize,
        start: usize,
        end: usize,
    ) {
        if let Some(plan) = self.plan(id, start, end) {
            if plans.len() <= id {
                plans.resize_with(id + 1, || None);
            }
            heap.push(Frontier {
                decrease: plan.decrease,
                id,
                start,
                end,
            });
            plans[id] = Some(plan);
        }
    }

    /// Decides whether node `id` splits and how.
    fn plan(&mut self, id: usize, start: usize, end: usize) -> Option<Plan> {
        let node = &self.nodes[id];
        let params = self.params;
        if params.max_depth.is_some_and(|d| node.depth >= d)
            || node.n_samples < params.min_samples_split
            || node.n_samples < 2 * params.min_samples_leaf
            || node.impurity <= EPSILON
        {
            return None;
        }
        let parent_w = node.weighted_counts;
        let parent_n = node.n_samples;
        let parent_imp = node.impurity;
        let mut rng = SplitMix64::new(self.keys[id]);
        let cand = self.find_split(&mut rng, start, end, parent_w, parent_n)?;
        let mid = start + cand.pos;
        let rows = &self.order[cand.feature];
        let left = self.counts(&rows[start..mid]);
        let right = self.counts(&rows[mid..end]);
        let decrease = impurity_decrease(params.criterion, parent_w, left.1, right.1, self.total_weight);
        debug_assert!(parent_imp >= 0.0);
        if decrease + EPSILON < params.min_impurity_decrease {
            return None;
        }
        Some(Plan {
            feature: cand.feature,
            threshold: cand.threshold,
            mid,
            left,
            right,
            decrease,
        })
    }

    fn find_split(
        &mut self,
        rng: &mut SplitMix64,
        start: usize,
        end: usize,
        parent_w: [f64; 2],
        parent_n: usize,
    ) -> Option<Candidate> {
        let p = self.feats.len();
        for (i, f) in self.feats.iter_mut().enumerate() {
            *f = i;
        }
        let mut best: Option<Candidate> = None;
        let sample = self.n_try < p;
        let mut visited = 0;
        let mut i = 0;
        while i < p && visited < self.n_try {
            let f = if sample {
                let j = i + rng.below(p - i);
                self.feats.swap(i, j);
                self.feats[i]
            } else {
                i
            };
            i += 1;
            let col = &self.data.cols[f];
            if col[self.order[f][end - 1] as usize] <= col[self.order[f][start] as usize] {
                continue;
            }
            visited += 1;
            let cand = match self.params.splitter {
                Splitter::Best => self.scan_best(f, start, end, parent_w, parent_n),
                Splitter::Random => self.scan_random(rng, f, start, end, parent_w, parent_n),
            };
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.proxy > b.proxy) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn proxy(&self, lw: [f64; 2], parent_w: [f64; 2]) -> f64 {
        let rw = [parent_w[0] - lw[0], parent_w[1] - lw[1]];
        let c = self.params.criterion;
        -((lw[0] + lw[1]) * impurity(c, lw) + (rw[0] + rw[1]) * impurity(c, rw))
    }

    fn scan_best(&self, f: usize, start: usize, end: usize, parent_w: [f64; 2], parent_n: usize) -> Option<Candidate> {
        let col = &self.data.cols[f];
        let rows = &self.order[f][start..end];
        let min_leaf = self.params.min_samples_leaf;
        let mut lw = [0.0f64; 2];
        let mut ln = 0usize;
        let mut best: Option<Candidate> = None;
        for i in 0..rows.len() - 1 {
            let r = rows[i] as usize;
            lw[self.data.y[r] as usize] += self.sw[r];
            ln += self.mult[r] as usize;
            let v = col[r];
            let next = col[rows[i + 1] as usize];
            if next <= v || ln < min_leaf {
                continue;
            }
            if parent_n - ln < min_leaf {
                break;
            }
            let proxy = self.proxy(lw, parent_w);
            if best.as_ref().is_none_or(|b| proxy > b.proxy) {
                let mut t = v / 2.0 + next / 2.0;
                if t == next || !t.is_finite() {
                    t = v;
                }
                best = Some(Candidate {
                    feature: f,
                    threshold: t,
                    pos: i + 1,
                    proxy,
                });
            }
        }
        best
    }

    fn scan_random(
        &self,
        rng: &mut SplitMix64,
        f: usize,
        start: usize,
        end: usize,
        parent_w: [f64; 2],
        parent_n: usize,
    ) -> Option<Candidate> {
        let data = self.data;
        let col = &data.cols[f];
        let lo = col[self.order[f][start] as usize];
        let hi = col[self.order[f][end - 1] as usize];
        let mut t = lo + rng.next_f64() * (hi - lo);
        if t >= hi {
            t = lo;
        }
        let rows = &self.order[f][start..end];
        let mut lw = [0.0f64; 2];
        let mut ln = 0usize;
        let mut pos = 0;
        while col[rows[pos] as usize] <= t {
            let r = rows[pos] as usize;
            lw[self.data.y[r] as usize] += self.sw[r];
            ln += self.mult[r] as usize;
            pos += 1;
        }
        let min_leaf = self.params.min_samples_leaf;
        if ln < min_leaf || parent_n - ln < min_leaf {
            return None;
        }
        Some(Candidate {
            feature: f,
            threshold: t,
            pos,
            proxy: self.proxy(lw, parent_w),
        })
    }

    fn apply(&mut self, id: usize, start: usize, end: usize, plan: Plan) -> (usize, usize) {
        let mid = plan.mid;
        {
            let rows = &self.order[plan.feature];
            for &r in &rows[start..mid] {
                self.go_left[r as usize] = true;
            }
            for &r in &rows[mid..end] {
                self.go_left[r as usize] = false;
            }
        }
        for g in 0..self.order.len() {
            if g == plan.feature {
                continue;
            }
            let range = &mut self.order[g][start..end];
            self.buf.clear();
            self.buf.extend(range.iter().copied().filter(|&r| self.go_left[r as usize]));
            self.buf.extend(range.iter().copied().filter(|&r| !self.go_left[r as usize]));
            range.copy_from_slice(&self.buf);
        }
        let depth = self.nodes[id].depth + 1;
        let key = self.keys[id];
        let l = self.push_node(depth, child_key(key, 0), plan.left);
        let r = self.push_node(depth, child_key(key, 1), plan.right);
        self.nodes[id].split = Some(Split {
            feature: plan.feature,
            threshold: plan.threshold,
            left: l,
            right: r,
            impurity_decrease: plan.decrease,
        });
        (l, r)
    }
}

fn child_key(parent: u64, side: u64) -> u64 {
    mix64(parent ^ mix64(side.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Weighted impurity decrease of a split, normalised by the root weight.
pub fn impurity_decrease(
    criterion: Criterion,
    parent: [f64; 2],
    left: [f64; 2],
    right: [f64; 2],
    total_weight: f64,
) -> f64 {
    let wt = parent[0] + parent[1];
    let wl = left[0] + left[1];
    let wr = right[0] + right[1];
    wt / total_weight
        * (impurity(criterion, parent) - wl / wt * impurity(criterion, left) - wr / wt * impurity(criterion, right))
}
