//! CART decision trees with Gini impurity, and the two ensembles built on
//! them: random forests (bootstrap + feature subsampling) and extremely
//! randomized trees (random thresholds on the full training set).

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, SplitRole};

/// Gini impurity `1 - p0² - p1²` of a node with the given class counts.
pub fn gini(counts: [usize; 2]) -> Result<f64> {
    let n = counts[0] + counts[1];
    if n == 0 {
        return Err(Error::EmptyNode);
    }
    let p0 = counts[0] as f64 / n as f64;
    let p1 = counts[1] as f64 / n as f64;
    Ok(1.0 - p0 * p0 - p1 * p1)
}

fn gini_unchecked(c0: usize, c1: usize) -> f64 {
    let n = (c0 + c1) as f64;
    let (p0, p1) = (c0 as f64 / n, c1 as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

/// Weighted impurity decrease of splitting `parent` into `left` and the rest.
fn impurity_decrease(parent: [usize; 2], left: [usize; 2]) -> f64 {
    let right = [parent[0] - left[0], parent[1] - left[1]];
    let n = (parent[0] + parent[1]) as f64;
    let nl = (left[0] + left[1]) as f64;
    let nr = (right[0] + right[1]) as f64;
    gini_unchecked(parent[0], parent[1]) - nl / n * gini_unchecked(left[0], left[1]) - nr / n * gini_unchecked(right[0], right[1])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

impl Split {
    /// Higher decrease wins; ties go to the lower feature, then the lower threshold.
    fn beats(&self, other: &Split) -> bool {
        if self.impurity_decrease != other.impurity_decrease {
            return self.impurity_decrease > other.impurity_decrease;
        }
        (self.feature, self.threshold) < (other.feature, other.threshold)
    }
}

fn class_counts(labels: &[u8], rows: &[usize]) -> [usize; 2] {
    let ones = rows.iter().filter(|&&r| labels[r] == 1).count();
    [rows.len() - ones, ones]
}

/// Exhaustive scan of one feature over midpoints between consecutive distinct
/// values. `None` when the feature is constant on `rows`.
fn best_threshold(
    data: &FeatureMatrix,
    rows: &[usize],
    feature: usize,
    parent: [usize; 2],
    scratch: &mut Vec<(f32, u8)>,
) -> Option<Split> {
    let d = data.n_features();
    let values = data.values();
    let labels = data.labels();
    scratch.clear();
    scratch.extend(rows.iter().map(|&r| (values[r * d + feature], labels[r])));
    scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if scratch.first()?.0 == scratch.last()?.0 {
        return None;
    }
    let mut left = [0usize; 2];
    let mut best: Option<Split> = None;
    for i in 0..scratch.len() - 1 {
        left[scratch[i].1 as usize] += 1;
        let (v, next) = (scratch[i].0, scratch[i + 1].0);
        if v == next {
            continue;
        }
        let candidate = Split {
            feature,
            threshold: (f64::from(v) + f64::from(next)) / 2.0,
            impurity_decrease: impurity_decrease(parent, left),
        };
        if best.as_ref().is_none_or(|b| candidate.beats(b)) {
            best = Some(candidate);
        }
    }
    best
}

/// Best Gini split of `rows` over `candidate_features`, or `None` when every
/// candidate is constant on the node.
pub fn best_split(data: &FeatureMatrix, rows: &[usize], candidate_features: &[usize]) -> Option<Split> {
    let parent = class_counts(data.labels(), rows);
    let mut scratch = Vec::with_capacity(rows.len());
    let mut best: Option<Split> = None;
    for &f in candidate_features {
        if let Some(s) = best_threshold(data, rows, f, parent, &mut scratch) {
            if best.as_ref().is_none_or(|b| s.beats(b)) {
                best = Some(s);
            }
        }
    }
    best
}

/// Flat tree node; children are indices into [`DecisionTree::nodes`].
#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Leaf {
        label: u8,
        counts: [u32; 2],
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f32]) -> u8 {
        self.leaf_for(row).0
    }

    /// Label and index of the leaf reached by `row`.
    pub fn leaf_for(&self, row: &[f32]) -> (u8, usize) {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { label, .. } => return (*label, i),
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if f64::from(row[*feature]) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            max = max.max(d);
            if let TreeNode::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        max
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}

/// Number of candidate features examined per node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MaxFeatures {
    #[default]
    All,
    /// `floor(sqrt(d))`, at least one.
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => (libm::floor(libm::sqrt(d as f64)) as usize).max(1),
            MaxFeatures::Count(k) => k.clamp(1, d),
        }
        .min(d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Splitter {
    Best,
    RandomThreshold,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TreeParams {
    pub max_features: MaxFeatures,
}

struct Builder<'a> {
    data: &'a FeatureMatrix,
    splitter: Splitter,
    max_features: usize,
    /// Persistent permutation for partial Fisher–Yates draws.
    feature_order: Vec<usize>,
    scratch: Vec<(f32, u8)>,
}

impl Builder<'_> {
    fn leaf(counts: [usize; 2]) -> TreeNode {
        TreeNode::Leaf { label: u8::from(counts[1] >= counts[0]), counts: [counts[0] as u32, counts[1] as u32] }
    }

    fn feature_range(&self, rows: &[usize], feature: usize) -> (f32, f32) {
        let d = self.data.n_features();
        let values = self.data.values();
        rows.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &r| {
            let v = values[r * d + feature];
            (lo.min(v), hi.max(v))
        })
    }

    fn random_threshold_split(&self, rows: &[usize], feature: usize, parent: [usize; 2], rng: &mut ChaCha8Rng) -> Option<Split> {
        let (lo, hi) = self.feature_range(rows, feature);
        if lo >= hi {
            return None;
        }
        let (lo, hi) = (f64::from(lo), f64::from(hi));
        let mut threshold = lo + rng.random::<f64>() * (hi - lo);
        if threshold >= hi {
            threshold = lo;
        }
        let d = self.data.n_features();
        let values = self.data.values();
        let labels = self.data.labels();
        let mut left = [0usize; 2];
        for &r in rows {
            if f64::from(values[r * d + feature]) <= threshold {
                left[labels[r] as usize] += 1;
            }
        }
        Some(Split { feature, threshold, impurity_decrease: impurity_decrease(parent, left) })
    }

    fn evaluate(&mut self, rows: &[usize], feature: usize, parent: [usize; 2], rng: &mut ChaCha8Rng) -> Option<Split> {
        match self.splitter {
            Splitter::Best => best_threshold(self.data, rows, feature, parent, &mut self.scratch),
            Splitter::RandomThreshold => self.random_threshold_split(rows, feature, parent, rng),
        }
    }

    /// Visits features in random order until `max_features` non-constant
    /// ones were evaluated; with all features it scans them in index order.
    fn choose_split(&mut self, rows: &[usize], parent: [usize; 2], rng: &mut ChaCha8Rng) -> Option<Split> {
        let d = self.data.n_features();
        let mut best: Option<Split> = None;
        let mut visited = 0;
        for i in 0..d {
            if visited == self.max_features {
                break;
            }
            let feature = if self.max_features == d && self.splitter == Splitter::Best {
                i
            } else {
                let j = rng.random_range(i..d);
                self.feature_order.swap(i, j);
                self.feature_order[i]
            };
            if let Some(s) = self.evaluate(rows, feature, parent, rng) {
                visited += 1;
                if best.as_ref().is_none_or(|b| s.beats(b)) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn build(mut self, rows: Vec<usize>, rng: &mut ChaCha8Rng) -> DecisionTree {
        let d = self.data.n_features();
        let values = self.data.values();
        let labels = self.data.labels();
        let mut nodes = vec![TreeNode::Leaf { label: 0, counts: [0, 0] }];
        let mut stack = vec![(0usize, rows)];
        while let Some((index, rows)) = stack.pop() {
            let counts = class_counts(labels, &rows);
            let pure = counts[0] == 0 || counts[1] == 0;
            let split = if pure { None } else { self.choose_split(&rows, counts, rng) };
            let Some(split) = split else {
                nodes[index] = Self::leaf(counts);
                continue;
            };
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| f64::from(values[r * d + split.feature]) <= split.threshold);
            let (left, right) = (nodes.len(), nodes.len() + 1);
            nodes.push(TreeNode::Leaf { label: 0, counts: [0, 0] });
            nodes.push(TreeNode::Leaf { label: 0, counts: [0, 0] });
            nodes[index] = TreeNode::Split { feature: split.feature, threshold: split.threshold, left, right };
            // Right first so the left subtree is expanded first.
            stack.push((right, right_rows));
            stack.push((left, left_rows));
        }
        DecisionTree { nodes, n_features: d }
    }
}

fn grow(
    data: &FeatureMatrix,
    rows: Vec<usize>,
    splitter: Splitter,
    max_features: MaxFeatures,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let d = data.n_features();
    Builder { data, splitter, max_features: max_features.resolve(d), feature_order: (0..d).collect(), scratch: Vec::new() }
        .build(rows, rng)
}

/// Fully grown CART tree: nodes split until pure or inseparable, with no
/// depth limit or pruning.
pub fn fit_tree(train: &FeatureMatrix, params: &TreeParams, rng: &mut ChaCha8Rng) -> Result<DecisionTree> {
    debug_assert_ne!(train.role(), SplitRole::Test, "tree fitted on test rows");
    if train.n_samples() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    Ok(grow(train, (0..train.n_samples()).collect(), Splitter::Best, params.max_features, rng))
}

/// Majority-vote ensemble; vote ties predict 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
}

impl Forest {
    /// Votes for `[label 0, label 1]`.
    pub fn tally(&self, row: &[f32]) -> [u32; 2] {
        let mut votes = [0u32; 2];
        for t in &self.trees {
            votes[t.predict_row(row) as usize] += 1;
        }
        votes
    }

    pub fn predict_row(&self, row: &[f32]) -> u8 {
        let v = self.tally(row);
        u8::from(v[1] >= v[0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, bootstrap: true, max_features: MaxFeatures::Sqrt }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtraTreesParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
}

impl Default for ExtraTreesParams {
    fn default() -> Self {
        Self { n_trees: 100, max_features: MaxFeatures::Sqrt }
    }
}

/// Independent stream per tree, derived from the master seed.
pub fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

fn check_ensemble_input(train: &FeatureMatrix, n_trees: usize) -> Result<()> {
    debug_assert_ne!(train.role(), SplitRole::Test, "ensemble fitted on test rows");
    if train.n_samples() < 2 {
        return Err(Error::TooFewSamples { needed: 2, actual: train.n_samples() });
    }
    if n_trees == 0 {
        return Err(Error::InvalidParameter("ensemble needs at least one tree".into()));
    }
    Ok(())
}

/// Random forest: each tree sees a bootstrap resample of `n` rows (when
/// enabled) and a random feature subset at every node.
pub fn fit_forest(train: &FeatureMatrix, params: &ForestParams, seed: u64) -> Result<Forest> {
    check_ensemble_input(train, params.n_trees)?;
    let n = train.n_samples();
    let trees = (0..params.n_trees).map(|t| fit_forest_tree(train, params, seed, t, n)).collect();
    Ok(Forest { trees, n_features: train.n_features() })
}

/// Tree `t` of a random forest; identical whether trees are built in
/// sequence or in parallel.
pub fn fit_forest_tree(train: &FeatureMatrix, params: &ForestParams, seed: u64, t: usize, n: usize) -> DecisionTree {
    let mut rng = tree_rng(seed, t);
    let rows = if params.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
    grow(train, rows, Splitter::Best, params.max_features, &mut rng)
}

/// Extremely randomized trees: full training set per tree; each examined
/// feature gets one uniform threshold in the node's `[min, max)`.
pub fn fit_extra_trees(train: &FeatureMatrix, params: &ExtraTreesParams, seed: u64) -> Result<Forest> {
    check_ensemble_input(train, params.n_trees)?;
    let trees = (0..params.n_trees).map(|t| fit_extra_tree(train, params, seed, t)).collect();
    Ok(Forest { trees, n_features: train.n_features() })
}

pub fn fit_extra_tree(train: &FeatureMatrix, params: &ExtraTreesParams, seed: u64, t: usize) -> DecisionTree {
    let mut rng = tree_rng(seed, t);
    grow(train, (0..train.n_samples()).collect(), Splitter::RandomThreshold, params.max_features, &mut rng)
}
