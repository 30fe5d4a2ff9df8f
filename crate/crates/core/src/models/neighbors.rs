//! k-nearest-neighbour classification over brute-force, ball-tree and
//! KD-tree indexes.
//!
//! All three indexes return the same neighbours: candidates are ordered by
//! `(distance, row index)` and tree branches are pruned only when their lower
//! bound is strictly worse than the current k-th distance.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{abs, powf, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Brute,
    BallTree,
    KdTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
    pub algorithm: Algorithm,
    pub leaf_size: usize,
    /// Minkowski exponent; 1 is Manhattan, 2 Euclidean.
    pub p: f64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 5, algorithm: Algorithm::Brute, leaf_size: 10, p: 1.0 }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if self.leaf_size < 1 {
            return Err(Error::InvalidParameter("leaf_size must be >= 1".into()));
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidParameter(format!("Minkowski p must be >= 1, got {}", self.p)));
        }
        Ok(())
    }
}

/// Minkowski-`p` distance.
pub fn minkowski(u: &[f64], v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        u.iter().zip(v).map(|(a, b)| abs(a - b)).sum()
    } else if p == 2.0 {
        sqrt(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum())
    } else {
        powf(u.iter().zip(v).map(|(a, b)| powf(abs(a - b), p)).sum(), 1.0 / p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Bound {
    None,
    /// Centroid and covering radius.
    Ball { center: Vec<f64>, radius: f64 },
    /// Per-dimension bounding box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Node {
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
    bound: Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborIndex {
    dim: usize,
    p: f64,
    algorithm: Algorithm,
    points: Vec<f64>,
    spam: Vec<bool>,
    /// Row indices grouped so that every node covers a contiguous range.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    /// Indexes `n` row-major points with their labels.
    pub fn build(points: Vec<f64>, dim: usize, spam: Vec<bool>, cfg: &KnnConfig) -> Result<Self> {
        cfg.validate()?;
        let n = spam.len();
        if n == 0 {
            return Err(Error::InvalidInput("cannot index an empty point set".into()));
        }
        if points.len() != n * dim {
            return Err(Error::DimensionMismatch { expected: n * dim, found: points.len() });
        }
        let mut index =
            NeighborIndex { dim, p: cfg.p, algorithm: cfg.algorithm, points, spam, order: (0..n).collect(), nodes: Vec::new() };
        if cfg.algorithm != Algorithm::Brute {
            index.grow(0, n, 0, cfg.leaf_size);
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.spam.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spam.is_empty()
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Point counts of every leaf, in tree order. Brute force is one leaf.
    pub fn leaf_sizes(&self) -> Vec<usize> {
        if self.nodes.is_empty() {
            return alloc::vec![self.len()];
        }
        self.nodes.iter().filter(|n| n.children.is_none()).map(|n| n.end - n.start).collect()
    }

    fn grow(&mut self, start: usize, end: usize, depth: usize, leaf_size: usize) -> usize {
        let id = self.nodes.len();
        let bound = self.bound_of(start, end);
        self.nodes.push(Node { start, end, children: None, bound });
        if end - start <= leaf_size {
            return id;
        }
        let dim = match self.algorithm {
            Algorithm::KdTree => depth % self.dim.max(1),
            _ => self.widest_dimension(start, end),
        };
        let points = &self.points;
        let d = self.dim;
        self.order[start..end].sort_by(|&a, &b| points[a * d + dim].total_cmp(&points[b * d + dim]).then(a.cmp(&b)));
        let mid = start + (end - start) / 2;
        let left = self.grow(start, mid, depth + 1, leaf_size);
        let right = self.grow(mid, end, depth + 1, leaf_size);
        self.nodes[id].children = Some((left, right));
        id
    }

    fn widest_dimension(&self, start: usize, end: usize) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for j in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.points[i * self.dim + j];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best.1 {
                best = (j, hi - lo);
            }
        }
        best.0
    }

    fn bound_of(&self, start: usize, end: usize) -> Bound {
        let members = &self.order[start..end];
        match self.algorithm {
            Algorithm::Brute => Bound::None,
            Algorithm::BallTree => {
                let mut center = alloc::vec![0.0; self.dim];
                for &i in members {
                    for (c, v) in center.iter_mut().zip(self.point(i)) {
                        *c += v;
                    }
                }
                for c in &mut center {
                    *c /= members.len() as f64;
                }
                let radius = members.iter().map(|&i| minkowski(&center, self.point(i), self.p)).fold(0.0, f64::max);
                Bound::Ball { center, radius }
            }
            Algorithm::KdTree => {
                let mut lo = alloc::vec![f64::INFINITY; self.dim];
                let mut hi = alloc::vec![f64::NEG_INFINITY; self.dim];
                for &i in members {
                    for (j, v) in self.point(i).iter().enumerate() {
                        lo[j] = lo[j].min(*v);
                        hi[j] = hi[j].max(*v);
                    }
                }
                Bound::Box { lo, hi }
            }
        }
    }

    fn lower_bound(&self, node: &Node, x: &[f64]) -> f64 {
        match &node.bound {
            Bound::None => 0.0,
            Bound::Ball { center, radius } => (minkowski(x, center, self.p) - radius).max(0.0),
            Bound::Box { lo, hi } => {
                let gaps: Vec<f64> = x.iter().zip(lo.iter().zip(hi)).map(|(v, (l, h))| (l - v).max(v - h).max(0.0)).collect();
                let zeros = alloc::vec![0.0; gaps.len()];
                minkowski(&gaps, &zeros, self.p)
            }
        }
    }

    /// The `k` nearest stored rows as `(row, distance)`, nearest first.
    pub fn query(&self, x: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        if k == 0 || k > self.len() {
            return Err(Error::InvalidParameter(format!("k = {k} but {} points are indexed", self.len())));
        }
        let mut best = Best { k, items: Vec::with_capacity(k + 1) };
        if self.nodes.is_empty() {
            for i in 0..self.len() {
                best.offer(i, minkowski(x, self.point(i), self.p));
            }
        } else {
            self.search(0, x, &mut best);
        }
        Ok(best.items)
    }

    fn search(&self, id: usize, x: &[f64], best: &mut Best) {
        let node = &self.nodes[id];
        if best.prunes(self.lower_bound(node, x)) {
            return;
        }
        match node.children {
            None => {
                for &i in &self.order[node.start..node.end] {
                    best.offer(i, minkowski(x, self.point(i), self.p));
                }
            }
            Some((l, r)) => {
                let (bl, br) = (self.lower_bound(&self.nodes[l], x), self.lower_bound(&self.nodes[r], x));
                let (first, second) = if bl <= br { (l, r) } else { (r, l) };
                self.search(first, x, best);
                self.search(second, x, best);
            }
        }
    }

    /// Fraction of spam among the `k` nearest rows, nudged by `1e-6` toward
    /// the tie-break winner when the vote is exactly even.
    pub fn spam_score(&self, x: &[f64], k: usize) -> Result<f64> {
        let nn = self.query(x, k)?;
        let (mut spam_votes, mut spam_dist, mut ham_dist) = (0usize, 0.0, 0.0);
        for (i, d) in &nn {
            if self.spam[*i] {
                spam_votes += 1;
                spam_dist += d;
            } else {
                ham_dist += d;
            }
        }
        let frac = spam_votes as f64 / k as f64;
        if 2 * spam_votes == k && spam_dist < ham_dist {
            return Ok(frac + TIE_NUDGE);
        }
        if 2 * spam_votes == k && spam_dist > ham_dist {
            return Ok(frac - TIE_NUDGE);
        }
        Ok(frac)
    }

    /// Majority label; an even vote goes to the class with the smaller summed
    /// distance and then to ham.
    pub fn predict_spam(&self, x: &[f64], k: usize) -> Result<bool> {
        Ok(self.spam_score(x, k)? > 0.5)
    }
}

const TIE_NUDGE: f64 = 1e-6;

struct Best {
    k: usize,
    items: Vec<(usize, f64)>,
}

impl Best {
    fn worst(&self) -> f64 {
        if self.items.len() < self.k { f64::INFINITY } else { self.items[self.k - 1].1 }
    }

    fn prunes(&self, bound: f64) -> bool {
        let w = self.worst();
        w.is_finite() && bound > w + 1e-9 * (1.0 + w)
    }

    fn offer(&mut self, i: usize, d: f64) {
        if self.items.len() == self.k {
            let (wi, wd) = self.items[self.k - 1];
            if (d, i) >= (wd, wi) {
                return;
            }
            self.items.pop();
        }
        let pos = self.items.partition_point(|&(j, e)| (e, j) < (d, i));
        self.items.insert(pos, (i, d));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::vec;
    use proptest::prelude::*;

    fn cfg(algorithm: Algorithm, p: f64) -> KnnConfig {
        KnnConfig { algorithm, p, ..Default::default() }
    }

    fn random_points(seed: u64, n: usize, dim: usize, integer: bool) -> Vec<f64> {
        let mut r = rng::stage_rng(seed, 0);
        (0..n * dim)
            .map(|_| if integer { rng::below(&mut r, 4) as f64 } else { rng::unit(&mut r) * 10.0 - 5.0 })
            .collect()
    }

    #[test]
    fn small_set_is_one_leaf() {
        let idx = NeighborIndex::build(random_points(1, 8, 3, false), 3, vec![false; 8], &cfg(Algorithm::BallTree, 1.0)).unwrap();
        assert_eq!(idx.leaf_sizes(), vec![8]);
    }

    #[test]
    fn leaves_partition_points() {
        for alg in [Algorithm::BallTree, Algorithm::KdTree] {
            let idx = NeighborIndex::build(random_points(2, 157, 4, false), 4, vec![true; 157], &cfg(alg, 1.0)).unwrap();
            let sizes = idx.leaf_sizes();
            assert!(sizes.len() > 1);
            assert!(sizes.iter().all(|&s| s <= 10));
            assert_eq!(sizes.iter().sum::<usize>(), 157);
            let mut seen = idx.order.clone();
            seen.sort();
            assert_eq!(seen, (0..157).collect::<Vec<_>>());
        }
    }

    #[test]
    fn duplicates_are_retained() {
        let pts = vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let idx = NeighborIndex::build(pts, 2, vec![true, false, true], &cfg(Algorithm::KdTree, 2.0)).unwrap();
        let nn = idx.query(&[1.0, 1.0], 3).unwrap();
        assert_eq!(nn, vec![(0, 0.0), (1, 0.0), (2, 0.0)]);
    }

    #[test]
    fn distance_examples() {
        let idx = NeighborIndex::build(vec![0.0, 0.0, 9.0, 9.0], 2, vec![false, true], &cfg(Algorithm::Brute, 2.0)).unwrap();
        assert_eq!(idx.query(&[3.0, 4.0], 1).unwrap(), vec![(0, 5.0)]);
        assert_eq!(idx.query(&[9.0, 9.0], 1).unwrap(), vec![(1, 0.0)]);
        assert!(idx.query(&[0.0, 0.0], 3).is_err());
        assert!(idx.query(&[0.0], 1).is_err());
    }

    #[test]
    fn empty_index_rejected() {
        assert!(NeighborIndex::build(vec![], 2, vec![], &KnnConfig::default()).is_err());
    }

    #[test]
    fn voting_rules() {
        // Neighbours of the origin on a line, with distances 1..=5.
        let pts: Vec<f64> = (1..=6).map(|v| v as f64).collect();
        let idx = NeighborIndex::build(pts, 1, vec![true, false, true, false, true, false], &KnnConfig::default()).unwrap();
        assert!(idx.predict_spam(&[0.0], 1).unwrap());
        assert!(idx.predict_spam(&[0.0], 5).unwrap());
        assert_eq!(idx.spam_score(&[0.0], 5).unwrap(), 0.6);
        // 2-2 split: spam at distances 1 and 3, ham at 2 and 4.
        assert!(idx.predict_spam(&[0.0], 4).unwrap());
        let idx2 = NeighborIndex::build(vec![1.0, 2.0, 3.0, 4.0], 1, vec![false, true, false, true], &KnnConfig::default()).unwrap();
        assert!(!idx2.predict_spam(&[0.0], 4).unwrap());
        // Exact tie in votes and distances goes to ham.
        let idx3 = NeighborIndex::build(vec![-1.0, 1.0], 1, vec![true, false], &KnnConfig::default()).unwrap();
        assert_eq!(idx3.spam_score(&[0.0], 2).unwrap(), 0.5);
        assert!(!idx3.predict_spam(&[0.0], 2).unwrap());
    }

    #[test]
    fn unanimous_spam_scores_one() {
        let idx = NeighborIndex::build((0..5).map(|v| v as f64).collect(), 1, vec![true; 5], &KnnConfig::default()).unwrap();
        assert_eq!(idx.spam_score(&[2.0], 5).unwrap(), 1.0);
    }

    #[test]
    fn trees_match_brute_force_on_200_points() {
        for (seed, integer) in [(3, false), (4, true)] {
            let pts = random_points(seed, 200, 6, integer);
            let queries = random_points(seed + 100, 20, 6, integer);
            for p in [1.0, 2.0] {
                let brute = NeighborIndex::build(pts.clone(), 6, vec![false; 200], &cfg(Algorithm::Brute, p)).unwrap();
                for alg in [Algorithm::BallTree, Algorithm::KdTree] {
                    let tree = NeighborIndex::build(pts.clone(), 6, vec![false; 200], &cfg(alg, p)).unwrap();
                    for q in queries.chunks(6) {
                        assert_eq!(tree.query(q, 7).unwrap(), brute.query(q, 7).unwrap());
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn distances_nondecreasing_and_exact(seed in 0u64..1000, n in 1usize..80, dim in 1usize..6, k in 1usize..8) {
            let k = k.min(n);
            let pts = random_points(seed, n, dim, seed % 2 == 0);
            let q = random_points(seed ^ 0xabc, 1, dim, seed % 2 == 0);
            let brute = NeighborIndex::build(pts.clone(), dim, vec![false; n], &cfg(Algorithm::Brute, 1.0)).unwrap().query(&q, k).unwrap();
            prop_assert!(brute.windows(2).all(|w| w[0].1 <= w[1].1));
            for alg in [Algorithm::BallTree, Algorithm::KdTree] {
                let mut c = cfg(alg, 1.0);
                c.leaf_size = 3;
                let tree = NeighborIndex::build(pts.clone(), dim, vec![false; n], &c).unwrap();
                prop_assert_eq!(tree.query(&q, k).unwrap(), brute.clone());
            }
        }

        #[test]
        fn metric_axioms(u in proptest::collection::vec(-5.0f64..5.0, 4), v in proptest::collection::vec(-5.0f64..5.0, 4), w in proptest::collection::vec(-5.0f64..5.0, 4)) {
            for p in [1.0, 2.0] {
                prop_assert_eq!(minkowski(&u, &u, p), 0.0);
                prop_assert_eq!(minkowski(&u, &v, p), minkowski(&v, &u, p));
                prop_assert!(minkowski(&u, &w, p) <= minkowski(&u, &v, p) + minkowski(&v, &w, p) + 1e-12);
            }
        }
    }
}
