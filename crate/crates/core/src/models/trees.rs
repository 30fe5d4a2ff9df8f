//! Random forests of Gini trees and second-order gradient-boosted trees.
//!
//! Splits send `value <= threshold` left. Thresholds are midpoints between
//! consecutive distinct feature values inside the node.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{ceil, sigmoid, softplus, sqrt};
use crate::rng::{self, Rng};

/// `1 - sum (n_c / n)^2`.
pub fn gini_impurity(counts: &[f64]) -> Result<f64> {
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) || counts.iter().any(|c| *c < 0.0) {
        return Err(Error::InvalidInput("Gini impurity needs nonnegative counts with a positive total".into()));
    }
    Ok(1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>())
}

fn gini2(ham: f64, spam: f64) -> f64 {
    let t = ham + spam;
    if t == 0.0 { 0.0 } else { 1.0 - (ham / t) * (ham / t) - (spam / t) * (spam / t) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Votes { ham: usize, spam: usize },
    Weight(f64),
}

/// A binary tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(&self, x: &[f64]) -> &Node {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
                leaf => return leaf,
            }
        }
    }

    /// Leaf vote for classification trees: spam only on a strict majority.
    pub fn votes_spam(&self, x: &[f64]) -> bool {
        matches!(self.leaf(x), Node::Votes { ham, spam } if spam > ham)
    }

    /// Leaf weight for boosting trees.
    pub fn weight(&self, x: &[f64]) -> f64 {
        match self.leaf(x) {
            Node::Weight(w) => *w,
            _ => 0.0,
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
                _ => 0,
            }
        }
        go(self, 0)
    }
}

/// Candidate split found by exhaustive search over one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Gini decrease or boosting gain.
    pub score: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b { a } else { m }
}

/// Sorted `(value, sample)` pairs of one feature over the node's samples.
fn sorted_column(rows: &[f64], dim: usize, samples: &[usize], feature: usize) -> Vec<(f64, usize)> {
    let mut col: Vec<(f64, usize)> = samples.iter().map(|&i| (rows[i * dim + feature], i)).collect();
    col.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    col
}

/// Best Gini split of `samples` on `feature`, or `None` if the feature is
/// constant there.
pub fn best_gini_split(rows: &[f64], dim: usize, spam: &[bool], samples: &[usize], feature: usize) -> Option<SplitChoice> {
    let col = sorted_column(rows, dim, samples, feature);
    let n = col.len() as f64;
    let total_spam = col.iter().filter(|(_, i)| spam[*i]).count() as f64;
    let parent = gini2(n - total_spam, total_spam);
    let (mut left_n, mut left_spam) = (0.0, 0.0);
    let mut best: Option<SplitChoice> = None;
    for w in 0..col.len().saturating_sub(1) {
        left_n += 1.0;
        if spam[col[w].1] {
            left_spam += 1.0;
        }
        if col[w].0 == col[w + 1].0 {
            continue;
        }
        let right_n = n - left_n;
        let right_spam = total_spam - left_spam;
        let child = (left_n / n) * gini2(left_n - left_spam, left_spam) + (right_n / n) * gini2(right_n - right_spam, right_spam);
        let score = parent - child;
        if best.is_none_or(|b| score > b.score) {
            best = Some(SplitChoice { feature, threshold: midpoint(col[w].0, col[w + 1].0), score });
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_split: usize,
    /// Features examined per node; `None` means `ceil(sqrt(N))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 50, min_samples_split: 2, max_features: None, bootstrap: true }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("forest needs at least one tree".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParameter("min_samples_split must be >= 2".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::InvalidParameter("max_features must be >= 1".into()));
        }
        Ok(())
    }
}

fn check_training(rows: &[f64], dim: usize, n: usize, has_both: bool) -> Result<()> {
    if n == 0 {
        return Err(Error::DegenerateTraining("no training rows".into()));
    }
    if rows.len() != n * dim {
        return Err(Error::DimensionMismatch { expected: n * dim, found: rows.len() });
    }
    if !has_both {
        return Err(Error::DegenerateTraining("training data holds a single class".into()));
    }
    Ok(())
}

/// Sorted distinct samples a split sends left; orders equally good splits
/// independently of column order.
fn left_key(rows: &[f64], dim: usize, members: &[usize], c: &SplitChoice) -> Vec<usize> {
    let mut key: Vec<usize> = members.iter().copied().filter(|&i| rows[i * dim + c.feature] <= c.threshold).collect();
    key.sort_unstable();
    key.dedup();
    key
}

/// Grows one Gini tree on `samples` (a bootstrap multiset or all rows).
pub fn grow_gini_tree(
    rows: &[f64],
    dim: usize,
    spam: &[bool],
    samples: Vec<usize>,
    max_features: usize,
    min_samples_split: usize,
    rng: &mut Rng,
) -> DecisionTree {
    let mut nodes = vec![Node::Votes { ham: 0, spam: 0 }];
    let mut stack = vec![(0usize, samples)];
    let mut features: Vec<usize> = (0..dim).collect();
    while let Some((at, members)) = stack.pop() {
        let n_spam = members.iter().filter(|&&i| spam[i]).count();
        let n_ham = members.len() - n_spam;
        let leaf = Node::Votes { ham: n_ham, spam: n_spam };
        if n_spam == 0 || n_ham == 0 || members.len() < min_samples_split {
            nodes[at] = leaf;
            continue;
        }
        // Draw features in random order; constant ones do not use up the
        // quota when nothing splittable has been seen yet.
        rng::shuffle(rng, &mut features);
        let mut best: Option<SplitChoice> = None;
        for (visited, &f) in features.iter().enumerate() {
            if visited >= max_features && best.is_some() {
                break;
            }
            if let Some(c) = best_gini_split(rows, dim, spam, &members, f) {
                let better = match best {
                    None => true,
                    Some(b) if c.score == b.score => {
                        let (kc, kb) = (left_key(rows, dim, &members, &c), left_key(rows, dim, &members, &b));
                        kc < kb || (kc == kb && c.feature < b.feature)
                    }
                    Some(b) => c.score > b.score,
                };
                if better {
                    best = Some(c);
                }
            }
        }
        let Some(choice) = best else {
            nodes[at] = leaf;
            continue;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            members.iter().partition(|&&i| rows[i * dim + choice.feature] <= choice.threshold);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Votes { ham: 0, spam: 0 });
        nodes.push(Node::Votes { ham: 0, spam: 0 });
        nodes[at] = Node::Split { feature: choice.feature, threshold: choice.threshold, left: l, right: r };
        stack.push((r, right));
        stack.push((l, left));
    }
    DecisionTree { nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub seed: u64,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    /// Random-number stream of tree `t`.
    pub fn tree_stream(t: usize) -> u64 {
        rng::STREAM_FIT + ((t as u64 + 1) << 16)
    }

    pub fn fit(rows: &[f64], dim: usize, spam: &[bool], params: &ForestParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let n = spam.len();
        check_training(rows, dim, n, spam.iter().any(|&s| s) && spam.iter().any(|&s| !s))?;
        let max_features = params.max_features.unwrap_or_else(|| ceil(sqrt(dim as f64)) as usize).clamp(1, dim.max(1));
        let trees = (0..params.n_trees)
            .map(|t| {
                let mut r = rng::stage_rng(seed, Self::tree_stream(t));
                let samples = if params.bootstrap {
                    (0..n).map(|_| rng::below(&mut r, n as u64) as usize).collect()
                } else {
                    (0..n).collect()
                };
                grow_gini_tree(rows, dim, spam, samples, max_features, params.min_samples_split, &mut r)
            })
            .collect();
        Ok(ForestModel { params: *params, seed, trees })
    }

    /// Fraction of trees voting spam.
    pub fn spam_fraction(&self, x: &[f64]) -> f64 {
        self.trees.iter().filter(|t| t.votes_spam(x)).count() as f64 / self.trees.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub rounds: usize,
    pub eta: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub max_depth: usize,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
    /// Initial margin.
    pub base_score: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams { rounds: 100, eta: 0.3, lambda: 1.0, gamma: 0.0, max_depth: 6, min_child_weight: 1.0, base_score: 0.0 }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.lambda >= 0.0) || !(self.gamma >= 0.0) || !(self.min_child_weight >= 0.0) {
            return Err(Error::InvalidParameter("lambda, gamma and min_child_weight must be >= 0".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
        }
        Ok(())
    }
}

/// `1/2 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)] - gamma`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let term = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (term(gl, hl) + term(gr, hr) - term(gl + gr, hl + hr)) - gamma
}

/// Best boosting split of `samples` on `feature` under the child-weight limit.
pub fn best_gain_split(
    rows: &[f64],
    dim: usize,
    grad: &[f64],
    hess: &[f64],
    samples: &[usize],
    feature: usize,
    params: &BoostParams,
) -> Option<SplitChoice> {
    let col = sorted_column(rows, dim, samples, feature);
    let g: f64 = samples.iter().map(|&i| grad[i]).sum();
    let h: f64 = samples.iter().map(|&i| hess[i]).sum();
    let (mut gl, mut hl) = (0.0, 0.0);
    let mut best: Option<SplitChoice> = None;
    for w in 0..col.len().saturating_sub(1) {
        gl += grad[col[w].1];
        hl += hess[col[w].1];
        if col[w].0 == col[w + 1].0 {
            continue;
        }
        let (gr, hr) = (g - gl, h - hl);
        if hl < params.min_child_weight || hr < params.min_child_weight {
            continue;
        }
        let score = split_gain(gl, hl, gr, hr, params.lambda, params.gamma);
        if best.is_none_or(|b| score > b.score) {
            best = Some(SplitChoice { feature, threshold: midpoint(col[w].0, col[w + 1].0), score });
        }
    }
    best
}

fn grow_boost_tree(rows: &[f64], dim: usize, grad: &[f64], hess: &[f64], n: usize, params: &BoostParams) -> DecisionTree {
    let mut nodes = vec![Node::Weight(0.0)];
    let mut stack = vec![(0usize, (0..n).collect::<Vec<usize>>(), 0usize)];
    while let Some((at, members, depth)) = stack.pop() {
        let g: f64 = members.iter().map(|&i| grad[i]).sum();
        let h: f64 = members.iter().map(|&i| hess[i]).sum();
        let leaf = Node::Weight(if h + params.lambda > 0.0 { -g / (h + params.lambda) } else { 0.0 });
        let choice = if depth < params.max_depth {
            (0..dim)
                .filter_map(|f| best_gain_split(rows, dim, grad, hess, &members, f, params))
                .fold(None, |acc: Option<SplitChoice>, c| if acc.is_none_or(|a| c.score > a.score) { Some(c) } else { acc })
        } else {
            None
        };
        match choice {
            Some(c) if c.score > 0.0 => {
                let (left, right): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| rows[i * dim + c.feature] <= c.threshold);
                let (l, r) = (nodes.len(), nodes.len() + 1);
                nodes.push(Node::Weight(0.0));
                nodes.push(Node::Weight(0.0));
                nodes[at] = Node::Split { feature: c.feature, threshold: c.threshold, left: l, right: r };
                stack.push((r, right, depth + 1));
                stack.push((l, left, depth + 1));
            }
            _ => nodes[at] = leaf,
        }
    }
    DecisionTree { nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub params: BoostParams,
    pub trees: Vec<DecisionTree>,
    /// Mean logistic loss before the first round and after each round.
    pub loss_trace: Vec<f64>,
}

fn mean_logistic_loss(margins: &[f64], spam: &[bool]) -> f64 {
    margins.iter().zip(spam).map(|(m, &s)| softplus(*m) - if s { *m } else { 0.0 }).sum::<f64>() / margins.len() as f64
}

impl BoostModel {
    pub fn fit(rows: &[f64], dim: usize, spam: &[bool], params: &BoostParams) -> Result<Self> {
        params.validate()?;
        let n = spam.len();
        check_training(rows, dim, n, spam.iter().any(|&s| s) && spam.iter().any(|&s| !s))?;
        let mut margins = vec![params.base_score; n];
        let mut trees = Vec::with_capacity(params.rounds);
        let mut loss_trace = vec![mean_logistic_loss(&margins, spam)];
        let (mut grad, mut hess) = (vec![0.0; n], vec![0.0; n]);
        for _ in 0..params.rounds {
            for i in 0..n {
                let p = sigmoid(margins[i]);
                grad[i] = p - if spam[i] { 1.0 } else { 0.0 };
                hess[i] = p * (1.0 - p);
            }
            let tree = grow_boost_tree(rows, dim, &grad, &hess, n, params);
            for (i, m) in margins.iter_mut().enumerate() {
                *m += params.eta * tree.weight(&rows[i * dim..(i + 1) * dim]);
            }
            loss_trace.push(mean_logistic_loss(&margins, spam));
            trees.push(tree);
        }
        Ok(BoostModel { params: *params, trees, loss_trace })
    }

    /// `base + eta * sum of tree outputs`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.params.base_score + self.params.eta * self.trees.iter().map(|t| t.weight(x)).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_rows(seed: u64, n: usize, dim: usize, levels: u64) -> Vec<f64> {
        let mut r = rng::stage_rng(seed, 0);
        (0..n * dim).map(|_| rng::below(&mut r, levels) as f64).collect()
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(&[4.0, 0.0]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[5.0, 5.0]).unwrap(), 0.5);
        assert_eq!(gini_impurity(&[3.0, 1.0]).unwrap(), 0.375);
        assert!(gini_impurity(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn single_tree_fits_separable_line() {
        let rows: Vec<f64> = (0..20).map(|v| v as f64).collect();
        let spam: Vec<bool> = (0..20).map(|v| v % 7 < 3).collect();
        let params = ForestParams { n_trees: 1, bootstrap: false, ..Default::default() };
        let f = ForestModel::fit(&rows, 1, &spam, &params, 1).unwrap();
        for (x, s) in rows.iter().zip(&spam) {
            assert_eq!(f.spam_fraction(&[*x]) > 0.5, *s);
        }
    }

    /// Every `(feature, threshold)` pair on the hand-built set, scored directly.
    #[test]
    fn first_split_matches_enumeration() {
        let rows = [1.0, 5.0, 2.0, 4.0, 3.0, 4.0, 4.0, 1.0, 5.0, 2.0, 6.0, 1.0];
        let spam = [false, false, false, true, true, true];
        let samples: Vec<usize> = (0..6).collect();
        let mut oracle = (0, 0.0, f64::NEG_INFINITY);
        for f in 0..2 {
            let mut vals: Vec<f64> = (0..6).map(|i| rows[i * 2 + f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (mut l, mut r) = ([0.0; 2], [0.0; 2]);
                for i in 0..6 {
                    let side = if rows[i * 2 + f] <= t { &mut l } else { &mut r };
                    side[spam[i] as usize] += 1.0;
                }
                let child = |c: [f64; 2]| (c[0] + c[1]) / 6.0 * gini_impurity(&c).unwrap();
                let dec = 0.5 - child(l) - child(r);
                if dec > oracle.2 {
                    oracle = (f, t, dec);
                }
            }
        }
        let best = (0..2).filter_map(|f| best_gini_split(&rows, 2, &spam, &samples, f)).fold(None, |a: Option<SplitChoice>, c| {
            if a.is_none_or(|a| c.score > a.score) { Some(c) } else { a }
        });
        let best = best.unwrap();
        assert_eq!((best.feature, best.threshold), (oracle.0, oracle.1));
        assert!((best.score - oracle.2).abs() < 1e-15);
    }

    #[test]
    fn vote_fractions_are_multiples_of_tree_count() {
        let rows = random_rows(3, 60, 4, 4);
        let spam: Vec<bool> = rows.chunks(4).map(|r| r[0] + r[1] > 3.0).collect();
        let f = ForestModel::fit(&rows, 4, &spam, &ForestParams::default(), 9).unwrap();
        assert_eq!(f.trees.len(), 50);
        for x in rows.chunks(4) {
            let v = f.spam_fraction(x) * 50.0;
            assert!((v - v.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn even_vote_goes_to_ham() {
        let spam_tree = DecisionTree { nodes: vec![Node::Votes { ham: 0, spam: 3 }] };
        let ham_tree = DecisionTree { nodes: vec![Node::Votes { ham: 2, spam: 2 }] };
        let mut trees = vec![spam_tree; 25];
        trees.extend(vec![ham_tree; 25]);
        let f = ForestModel { params: ForestParams::default(), seed: 0, trees };
        assert_eq!(f.spam_fraction(&[0.0]), 0.5);
    }

    #[test]
    fn forest_is_deterministic_per_seed() {
        let rows = random_rows(4, 50, 5, 3);
        let spam: Vec<bool> = rows.chunks(5).map(|r| r[2] > 0.0).collect();
        let a = ForestModel::fit(&rows, 5, &spam, &ForestParams { n_trees: 5, ..Default::default() }, 7).unwrap();
        let b = ForestModel::fit(&rows, 5, &spam, &ForestParams { n_trees: 5, ..Default::default() }, 7).unwrap();
        assert_eq!(a, b);
    }

    /// Index of the leaf reached by `x`.
    fn leaf_id(t: &DecisionTree, x: &[f64]) -> usize {
        let mut at = 0;
        while let Node::Split { feature, threshold, left, right } = t.nodes[at] {
            at = if x[feature] <= threshold { left } else { right };
        }
        at
    }

    /// Trees grown on permuted columns induce the same partition of the
    /// training rows. Splits that separate the rows identically through
    /// different columns may still route unseen points differently.
    #[test]
    fn forest_is_invariant_to_column_permutation() {
        let rows = random_rows(11, 80, 4, 5);
        let spam: Vec<bool> = rows.chunks(4).enumerate().map(|(i, x)| (x[0] + x[3] > 4.0) ^ (i % 7 == 0)).collect();
        let perm = [2usize, 0, 3, 1];
        let permuted: Vec<f64> = rows.chunks(4).flat_map(|x| perm.iter().map(|&p| x[p]).collect::<Vec<_>>()).collect();
        let params = ForestParams { n_trees: 3, max_features: Some(4), bootstrap: false, ..Default::default() };
        let a = ForestModel::fit(&rows, 4, &spam, &params, 3).unwrap();
        let b = ForestModel::fit(&permuted, 4, &spam, &params, 3).unwrap();
        for (ta, tb) in a.trees.iter().zip(&b.trees) {
            assert_eq!(ta.nodes.len(), tb.nodes.len());
            for (x, px) in rows.chunks(4).zip(permuted.chunks(4)) {
                assert_eq!(leaf_id(ta, x), leaf_id(tb, px));
            }
            for (na, nb) in ta.nodes.iter().zip(&tb.nodes) {
                match (na, nb) {
                    (Node::Split { .. }, Node::Split { .. }) => {}
                    (x, y) => assert_eq!(x, y),
                }
            }
        }
        for x in rows.chunks(4) {
            let px: Vec<f64> = perm.iter().map(|&p| x[p]).collect();
            assert_eq!(a.spam_fraction(x), b.spam_fraction(&px));
        }
    }

    #[test]
    fn chosen_splits_are_locally_optimal() {
        let rows = random_rows(5, 40, 3, 5);
        let spam: Vec<bool> = rows.chunks(3).map(|x| x[0] * x[1] > 4.0).collect();
        let mut r = rng::stage_rng(1, 0);
        let tree = grow_gini_tree(&rows, 3, &spam, (0..40).collect(), 3, 2, &mut r);
        fn check(t: &DecisionTree, at: usize, members: Vec<usize>, rows: &[f64], spam: &[bool]) {
            if let Node::Split { feature, threshold, left, right } = t.nodes[at] {
                let chosen = best_gini_split(rows, 3, spam, &members, feature).unwrap();
                assert_eq!(chosen.threshold, threshold);
                for f in 0..3 {
                    if let Some(c) = best_gini_split(rows, 3, spam, &members, f) {
                        assert!(chosen.score >= c.score);
                    }
                }
                let (l, r): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| rows[i * 3 + feature] <= threshold);
                check(t, left, l, rows, spam);
                check(t, right, r, rows, spam);
            }
        }
        check(&tree, 0, (0..40).collect(), &rows, &spam);
    }

    #[test]
    fn first_round_gradients_at_zero_margin() {
        let p = sigmoid(0.0);
        assert_eq!(p, 0.5);
        // Stump on four points: gradients +-0.5, hessians 0.25.
        let rows = [1.0, 2.0, 3.0, 4.0];
        let spam = [false, false, true, true];
        let params = BoostParams { rounds: 1, max_depth: 1, min_child_weight: 0.0, ..Default::default() };
        let m = BoostModel::fit(&rows, 1, &spam, &params).unwrap();
        let t = &m.trees[0];
        assert_eq!(t.nodes[0], Node::Split { feature: 0, threshold: 2.5, left: 1, right: 2 });
        // Left leaf: G = 1.0, H = 0.5, weight -1/1.5.
        assert!((t.weight(&[1.0]) + 1.0 / 1.5).abs() < 1e-15);
        assert!((t.weight(&[4.0]) - 1.0 / 1.5).abs() < 1e-15);
        assert!((m.margin(&[4.0]) - 0.3 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn stump_matches_hand_gain_enumeration() {
        let rows = [0.0, 1.0, 1.0, 2.0, 3.0];
        let spam = [false, true, false, true, true];
        let params = BoostParams { rounds: 1, max_depth: 1, min_child_weight: 0.0, lambda: 0.5, ..Default::default() };
        let g: Vec<f64> = spam.iter().map(|&s| if s { -0.5 } else { 0.5 }).collect();
        let mut best = (f64::NEG_INFINITY, 0.0);
        for t in [0.5, 1.5, 2.5] {
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for (x, gi) in rows.iter().zip(&g) {
                if *x <= t { gl += gi; hl += 0.25 } else { gr += gi; hr += 0.25 }
            }
            let gain = 0.5 * (gl * gl / (hl + 0.5) + gr * gr / (hr + 0.5) - (gl + gr) * (gl + gr) / (hl + hr + 0.5));
            if gain > best.0 {
                best = (gain, t);
            }
        }
        let m = BoostModel::fit(&rows, 1, &spam, &params).unwrap();
        match m.trees[0].nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, best.1),
            ref other => panic!("expected a split, got {other:?}"),
        }
    }

    #[test]
    fn huge_lambda_zeroes_leaves() {
        let rows = random_rows(6, 30, 2, 4);
        let spam: Vec<bool> = rows.chunks(2).map(|x| x[0] > 1.0).collect();
        let m = BoostModel::fit(&rows, 2, &spam, &BoostParams { rounds: 5, lambda: 1e15, ..Default::default() }).unwrap();
        for x in rows.chunks(2) {
            assert!(m.margin(x).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_margin_is_ham() {
        let m = BoostModel { params: BoostParams::default(), trees: vec![], loss_trace: vec![] };
        assert_eq!(m.margin(&[1.0]), 0.0);
        assert!(!(m.margin(&[1.0]) > 0.0));
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(ForestModel::fit(&[1.0], 1, &[true], &ForestParams::default(), 0), Err(Error::DegenerateTraining(_))));
        assert!(matches!(BoostModel::fit(&[], 1, &[], &BoostParams::default()), Err(Error::DegenerateTraining(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn boosting_loss_never_increases(seed in 0u64..1000, eta in 0.05f64..0.3) {
            let rows = random_rows(seed, 40, 3, 4);
            let spam: Vec<bool> = rows.chunks(3).enumerate().map(|(i, x)| (x[0] + x[1] > 3.0) ^ (i % 9 == 0)).collect();
            prop_assume!(spam.iter().any(|&s| s) && spam.iter().any(|&s| !s));
            let m = BoostModel::fit(&rows, 3, &spam, &BoostParams { rounds: 15, eta, ..Default::default() }).unwrap();
            prop_assert!(m.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}
