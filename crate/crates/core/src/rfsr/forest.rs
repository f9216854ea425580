//! CART regression trees and a bagged forest with out-of-bag scoring.
//!
//! Each tree draws a bootstrap resample of the training rows and grows by
//! greedy variance-reduction splits over a random subset of features.
//! Tree `t` owns its own RNG stream (master seed, stream `t + 1`), so the
//! forest is identical whether trees are grown serially or in parallel.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::features::TrainingSet;
use super::ForestParams;
use crate::{Error, Result};

/// One node in a flat tree array. A node is a leaf when `left == 0`; the
/// root lives at index 0 so no child can point there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub feature: u8,
    pub threshold: f32,
    pub left: u32,
    pub right: u32,
    /// Mean training target of the node (the prediction, for leaves).
    pub value: f32,
}

pub const LEAF_FEATURE: u8 = u8::MAX;

impl Node {
    pub fn leaf(value: f32) -> Self {
        Node {
            feature: LEAF_FEATURE,
            threshold: 0.0,
            left: 0,
            right: 0,
            value,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.left == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    /// Validates a flat node array: children must point forward and stay in
    /// range, and split features must be below `n_features`.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Format("tree has no nodes".into()));
        }
        for (i, n) in nodes.iter().enumerate() {
            if !n.value.is_finite() {
                return Err(Error::Format(format!("node {i} has a non-finite value")));
            }
            if n.is_leaf() {
                if n.right != 0 {
                    return Err(Error::Format(format!("leaf {i} has a right child")));
                }
                continue;
            }
            let ok = |c: u32| (c as usize) > i && (c as usize) < nodes.len();
            if !ok(n.left) || !ok(n.right) || n.left == n.right {
                return Err(Error::Format(format!("node {i} has invalid children")));
            }
            if n.feature as usize >= n_features || !n.threshold.is_finite() {
                return Err(Error::Format(format!("node {i} has an invalid split")));
            }
        }
        Ok(RegressionTree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn predict(&self, row: &[f32]) -> f32 {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            if n.is_leaf() {
                return n.value;
            }
            i = if row[n.feature as usize] <= n.threshold {
                n.left
            } else {
                n.right
            } as usize;
        }
    }

    /// Depth of the deepest node; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.is_leaf() {
                depth[n.left as usize] = depth[i] + 1;
                depth[n.right as usize] = depth[i] + 1;
                max = max.max(depth[i] + 1);
            }
        }
        max
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }
}

/// A trained ensemble plus its out-of-bag diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub(crate) trees: Vec<RegressionTree>,
    pub(crate) n_features: usize,
    pub(crate) params: ForestParams,
    pub(crate) seed: u64,
    /// Out-of-bag R². Zero for constant targets, NaN without bootstrap.
    pub(crate) oob_r2: f64,
    /// Out-of-bag mean squared error. NaN without bootstrap.
    pub(crate) oob_mse: f64,
}

impl Forest {
    pub fn from_parts(
        trees: Vec<RegressionTree>,
        n_features: usize,
        params: ForestParams,
        seed: u64,
        oob_r2: f64,
        oob_mse: f64,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::invalid("forest has no trees"));
        }
        Ok(Forest {
            trees,
            n_features,
            params,
            seed,
            oob_r2,
            oob_mse,
        })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn oob_r2(&self) -> f64 {
        self.oob_r2
    }

    pub fn oob_mse(&self) -> f64 {
        self.oob_mse
    }

    /// Mean of the per-tree predictions.
    #[inline]
    pub fn predict(&self, row: &[f32]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row) as f64).sum();
        sum / self.trees.len() as f64
    }
}

struct Split {
    feature: usize,
    threshold: f32,
    score: f64,
}

struct TreeBuilder<'a> {
    cols: &'a [Vec<f32>],
    y: &'a [f32],
    weight: &'a [u32],
    params: &'a ForestParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    order: Vec<usize>,
    scratch: Vec<(f32, u32)>,
}

fn midpoint(a: f32, b: f32) -> f32 {
    let m = ((a as f64 + b as f64) * 0.5) as f32;
    // Rounding can land on `b` when the two are adjacent floats.
    if m >= b {
        a
    } else {
        m
    }
}

impl TreeBuilder<'_> {
    fn grow(&mut self, idx: &mut [u32], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let (mut w_sum, mut y_sum) = (0.0f64, 0.0f64);
        let first_y = self.y[idx[0] as usize];
        let mut constant = true;
        for &i in idx.iter() {
            let w = self.weight[i as usize] as f64;
            let y = self.y[i as usize];
            w_sum += w;
            y_sum += w * y as f64;
            constant &= y == first_y;
        }
        let value = (y_sum / w_sum) as f32;
        self.nodes.push(Node::leaf(value));

        if depth >= self.params.max_depth || w_sum < self.params.min_samples_split as f64 || constant {
            return id;
        }
        let Some(split) = self.best_split(idx, w_sum, y_sum) else {
            return id;
        };

        let col = &self.cols[split.feature];
        let (mut left, mut right): (Vec<u32>, Vec<u32>) =
            idx.iter().partition(|&&i| col[i as usize] <= split.threshold);
        let n_left = left.len();
        idx[..n_left].copy_from_slice(&left);
        idx[n_left..].copy_from_slice(&right);
        left.clear();
        right.clear();

        let (l_idx, r_idx) = idx.split_at_mut(n_left);
        let l = self.grow(l_idx, depth + 1);
        let r = self.grow(r_idx, depth + 1);
        let node = &mut self.nodes[id as usize];
        node.feature = split.feature as u8;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        id
    }

    /// Best variance-reduction split over randomly ordered features.
    ///
    /// Features are visited in a fresh random order until
    /// `features_per_split` non-constant ones have been scored. Equal
    /// scores resolve to the lowest feature index, then lowest threshold.
    fn best_split(&mut self, idx: &[u32], w_sum: f64, y_sum: f64) -> Option<Split> {
        let parent = y_sum * y_sum / w_sum;
        self.order.shuffle(&mut self.rng);
        let mut best: Option<Split> = None;
        let mut scored = 0;
        for oi in 0..self.order.len() {
            if scored >= self.params.features_per_split {
                break;
            }
            let f = self.order[oi];
            let col = &self.cols[f];
            self.scratch.clear();
            self.scratch.extend(idx.iter().map(|&i| (col[i as usize], i)));
            self.scratch
                .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if self.scratch[0].0 == self.scratch[self.scratch.len() - 1].0 {
                continue;
            }
            scored += 1;

            let (mut wl, mut sl) = (0.0f64, 0.0f64);
            for j in 0..self.scratch.len() - 1 {
                let (v, i) = self.scratch[j];
                let w = self.weight[i as usize] as f64;
                wl += w;
                sl += w * self.y[i as usize] as f64;
                let next = self.scratch[j + 1].0;
                if v == next {
                    continue;
                }
                let wr = w_sum - wl;
                let sr = y_sum - sl;
                let score = sl * sl / wl + sr * sr / wr;
                if score <= parent {
                    continue;
                }
                let threshold = midpoint(v, next);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        score > b.score
                            || (score == b.score && (f < b.feature || (f == b.feature && threshold < b.threshold)))
                    }
                };
                if better {
                    best = Some(Split {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

/// Grows one tree; returns it with its out-of-bag `(row, prediction)` pairs.
fn grow_tree(
    cols: &[Vec<f32>],
    set: &TrainingSet,
    params: &ForestParams,
    seed: u64,
    tree_index: usize,
) -> (RegressionTree, Vec<(u32, f32)>) {
    let n = set.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64 + 1);

    let mut weight = vec![0u32; n];
    if params.bootstrap {
        for _ in 0..n {
            weight[rng.gen_range(0..n)] += 1;
        }
    } else {
        weight.fill(1);
    }
    let mut idx: Vec<u32> = (0..n as u32).filter(|&i| weight[i as usize] > 0).collect();

    let mut builder = TreeBuilder {
        cols,
        y: set.targets(),
        weight: &weight,
        params,
        rng,
        nodes: Vec::new(),
        order: (0..set.n_features()).collect(),
        scratch: Vec::with_capacity(idx.len()),
    };
    builder.grow(&mut idx, 0);
    let tree = RegressionTree { nodes: builder.nodes };

    let oob = (0..n)
        .filter(|&i| weight[i] == 0)
        .map(|i| (i as u32, tree.predict(set.row(i))))
        .collect();
    (tree, oob)
}

/// Fits a forest. Deterministic for a given `(set, params, seed)`,
/// independent of the rayon thread count.
pub fn train_forest(set: &TrainingSet, params: &ForestParams, seed: u64) -> Result<Forest> {
    params.validate()?;
    if set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if set.len() < params.min_samples_split {
        return Err(Error::invalid(format!(
            "{} training rows is fewer than min_samples_split = {}",
            set.len(),
            params.min_samples_split
        )));
    }
    if set.n_features() > LEAF_FEATURE as usize {
        return Err(Error::invalid("at most 255 features are supported"));
    }
    let mut params = params.clone();
    params.features_per_split = params.features_per_split.min(set.n_features());

    let cols = set.columns();
    let grown: Vec<(RegressionTree, Vec<(u32, f32)>)> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| grow_tree(&cols, set, &params, seed, t))
        .collect();

    let n = set.len();
    let mut sum = vec![0.0f64; n];
    let mut votes = vec![0u32; n];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, oob) in grown {
        for (i, p) in oob {
            sum[i as usize] += p as f64;
            votes[i as usize] += 1;
        }
        trees.push(tree);
    }
    let (oob_r2, oob_mse) = if params.bootstrap {
        oob_scores(set.targets(), &sum, &votes)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(Forest {
        trees,
        n_features: set.n_features(),
        params,
        seed,
        oob_r2,
        oob_mse,
    })
}

/// R² and MSE over rows with at least one out-of-bag vote.
fn oob_scores(y: &[f32], sum: &[f64], votes: &[u32]) -> (f64, f64) {
    let voted: Vec<usize> = (0..y.len()).filter(|&i| votes[i] > 0).collect();
    if voted.is_empty() {
        return (0.0, f64::NAN);
    }
    let ys: Vec<f64> = voted.iter().map(|&i| y[i] as f64).collect();
    let mean = crate::stats::mean(&ys);
    let ss_tot: Vec<f64> = ys.iter().map(|v| (v - mean) * (v - mean)).collect();
    let ss_res: Vec<f64> = voted
        .iter()
        .map(|&i| {
            let e = y[i] as f64 - sum[i] / votes[i] as f64;
            e * e
        })
        .collect();
    let ss_tot = crate::stats::pairwise_sum(&ss_tot);
    let ss_res = crate::stats::pairwise_sum(&ss_res);
    let mse = ss_res / voted.len() as f64;
    if ss_tot == 0.0 {
        return (0.0, mse);
    }
    (1.0 - ss_res / ss_tot, mse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n_estimators: usize, max_depth: usize, min_samples_split: usize) -> ForestParams {
        ForestParams {
            n_estimators,
            max_depth,
            min_samples_split,
            ..ForestParams::default()
        }
    }

    fn random_set(
        rows: usize,
        n_features: usize,
        seed: u64,
        f: impl Fn(&[f32], &mut ChaCha8Rng) -> f32,
    ) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(rows * n_features);
        let mut y = Vec::with_capacity(rows);
        for _ in 0..rows {
            let row: Vec<f32> = (0..n_features).map(|_| rng.gen_range(-50.0..50.0)).collect();
            y.push(f(&row, &mut rng));
            x.extend(row);
        }
        TrainingSet::new(n_features, x, y).unwrap()
    }

    #[test]
    fn zero_targets_give_zero_forest() {
        let set = random_set(500, 25, 1, |_, _| 0.0);
        let forest = train_forest(&set, &params(5, 12, 200), 3).unwrap();
        for t in forest.trees() {
            assert_eq!(t.nodes().len(), 1);
            assert_eq!(t.nodes()[0].value, 0.0);
        }
        assert_eq!(forest.predict(set.row(0)), 0.0);
        assert_eq!(forest.oob_r2(), 0.0);
    }

    /// Brute force over every split of a one-feature binary problem.
    #[test]
    fn stump_on_binary_feature_matches_enumeration() {
        let xs: Vec<f32> = (0..40).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let ys: Vec<f32> = xs.iter().map(|&x| 10.0 * x).collect();

        // Oracle: the best threshold among all midpoints by SSE.
        let mut candidates: Vec<f32> = xs.clone();
        candidates.sort_by(f32::total_cmp);
        candidates.dedup();
        let sse = |thr: f32| {
            let (l, r): (Vec<f32>, Vec<f32>) = xs.iter().zip(&ys).fold((vec![], vec![]), |(mut l, mut r), (&x, &y)| {
                if x <= thr {
                    l.push(y)
                } else {
                    r.push(y)
                }
                (l, r)
            });
            let s = |v: &[f32]| {
                let m = v.iter().sum::<f32>() / v.len() as f32;
                v.iter().map(|y| (y - m).powi(2)).sum::<f32>()
            };
            s(&l) + s(&r)
        };
        let oracle = candidates
            .windows(2)
            .map(|w| (w[0] + w[1]) / 2.0)
            .min_by(|a, b| sse(*a).total_cmp(&sse(*b)))
            .unwrap();
        assert_eq!(oracle, 0.5);

        let set = TrainingSet::new(1, xs, ys).unwrap();
        let p = ForestParams {
            n_estimators: 1,
            max_depth: 1,
            min_samples_split: 2,
            features_per_split: 1,
            bootstrap: false,
            ..ForestParams::default()
        };
        let forest = train_forest(&set, &p, 0).unwrap();
        let tree = &forest.trees()[0];
        let root = tree.nodes()[0];
        assert_eq!(root.threshold, oracle);
        assert_eq!(tree.nodes()[root.left as usize].value, 0.0);
        assert_eq!(tree.nodes()[root.right as usize].value, 10.0);
        assert!(forest.oob_r2().is_nan());
    }

    #[test]
    fn identity_on_one_feature_is_learned() {
        let set = random_set(10_000, 25, 7, |row, _| row[7]);
        let forest = train_forest(&set, &params(20, 12, 200), 42).unwrap();
        assert!(forest.oob_r2() > 0.9, "oob r2 {}", forest.oob_r2());
    }

    #[test]
    fn shuffled_targets_have_no_oob_skill() {
        let set = random_set(10_000, 25, 8, |_, rng| rng.gen_range(-50.0..50.0));
        let forest = train_forest(&set, &params(20, 12, 200), 1).unwrap();
        assert!(forest.oob_r2() <= 0.05, "oob r2 {}", forest.oob_r2());
    }

    #[test]
    fn depth_and_min_split_respected() {
        let set = random_set(3_000, 6, 2, |row, _| row[0] * row[1] / 10.0 + row[2]);
        for (depth, min_split) in [(3, 2), (12, 200), (6, 50)] {
            let p = ForestParams {
                features_per_split: 3,
                ..params(4, depth, min_split)
            };
            let forest = train_forest(&set, &p, 5).unwrap();
            for tree in forest.trees() {
                assert!(tree.depth() <= depth);
                assert!(tree.depth() > 0);
            }
        }
    }

    #[test]
    fn internal_nodes_had_enough_samples() {
        // Without bootstrap every row has weight one, so the rows routed to
        // a node can be counted directly.
        let set = random_set(2_000, 4, 3, |row, _| row[0].signum() * 5.0 + row[1] / 10.0);
        let p = ForestParams {
            bootstrap: false,
            features_per_split: 4,
            ..params(1, 12, 150)
        };
        let forest = train_forest(&set, &p, 0).unwrap();
        let tree = &forest.trees()[0];
        let mut counts = vec![0usize; tree.nodes().len()];
        for i in 0..set.len() {
            let mut n = 0usize;
            loop {
                counts[n] += 1;
                let node = tree.nodes()[n];
                if node.is_leaf() {
                    break;
                }
                n = if set.row(i)[node.feature as usize] <= node.threshold {
                    node.left
                } else {
                    node.right
                } as usize;
            }
        }
        for (node, c) in tree.nodes().iter().zip(&counts) {
            if !node.is_leaf() {
                assert!(*c >= 150);
            }
        }
    }

    #[test]
    fn training_is_deterministic_across_thread_counts() {
        let set = random_set(2_000, 25, 4, |row, _| row[3] - row[20]);
        let p = params(8, 8, 50);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| train_forest(&set, &p, 99).unwrap());
        let b = four.install(|| train_forest(&set, &p, 99).unwrap());
        assert_eq!(a, b);
        let c = train_forest(&set, &p, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_few_rows_rejected() {
        let set = random_set(50, 3, 0, |_, _| 1.0);
        assert!(train_forest(&set, &params(2, 4, 200), 0).is_err());
    }

    #[test]
    fn from_nodes_rejects_cycles() {
        let bad = vec![
            Node {
                feature: 0,
                threshold: 0.0,
                left: 1,
                right: 0,
                value: 0.0,
            },
            Node::leaf(1.0),
        ];
        assert!(RegressionTree::from_nodes(bad, 1).is_err());
        let bad_feature = vec![
            Node {
                feature: 3,
                threshold: 0.0,
                left: 1,
                right: 2,
                value: 0.0,
            },
            Node::leaf(1.0),
            Node::leaf(2.0),
        ];
        assert!(RegressionTree::from_nodes(bad_feature, 2).is_err());
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let a = 1.0f32;
        let b = f32::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(a <= m && m < b);
        assert_eq!(midpoint(0.0, 1.0), 0.5);
    }
}
