//! Model-agnostic Shapley attributions of decision scores.
//!
//! The value of a feature coalition `S` at instance `x` is the model score
//! averaged over hybrid rows that take the features in `S` from `x` and the
//! rest from each background row. Exact enumeration handles up to
//! [`MAX_EXACT_FEATURES`] features; permutation sampling covers the rest.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::abs;
use crate::models::TrainedModel;
use crate::rng;
use crate::vectorize::FeatureMatrix;

pub const MAX_EXACT_FEATURES: usize = 12;
pub const DEFAULT_BACKGROUND_SIZE: usize = 100;

/// Anything that maps a feature row to a spam-direction score.
pub trait Scorer {
    fn n_features(&self) -> usize;
    fn score(&self, row: &[f64]) -> f64;
}

impl Scorer for TrainedModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn score(&self, row: &[f64]) -> f64 {
        self.score_row(row)
    }
}

/// Adapts a closure to [`Scorer`].
pub struct FnScorer<F> {
    pub n_features: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64> Scorer for FnScorer<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn score(&self, row: &[f64]) -> f64 {
        (self.f)(row)
    }
}

/// Reference rows that stand in for absent features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub dim: usize,
    pub rows: Vec<f64>,
}

impl Background {
    pub fn new(rows: Vec<f64>, dim: usize) -> Result<Self> {
        if rows.is_empty() || dim == 0 || !rows.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput("background needs at least one complete row".into()));
        }
        Ok(Background { dim, rows })
    }

    /// Up to `size` training rows chosen by a seeded shuffle, kept in
    /// matrix order.
    pub fn sample(x: &FeatureMatrix, size: usize, seed: u64) -> Result<Self> {
        let mut pos: Vec<usize> = (0..x.n_rows()).collect();
        let mut r = rng::stage_rng(seed, rng::STREAM_BACKGROUND);
        rng::shuffle(&mut r, &mut pos);
        pos.truncate(size.max(1));
        pos.sort_unstable();
        let mut rows = Vec::with_capacity(pos.len() * x.n_features);
        for p in pos {
            rows.extend_from_slice(x.row(p));
        }
        Self::new(rows, x.n_features)
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSet {
    pub instance: String,
    pub values: Vec<f64>,
    /// Mean score over the background.
    pub base_value: f64,
    /// Score at the instance.
    pub score: f64,
    /// The instance's feature values (word counts), kept for plotting.
    pub features: Vec<f64>,
}

impl AttributionSet {
    /// `score - base - sum(values)`.
    pub fn efficiency_gap(&self) -> f64 {
        self.score - self.base_value - self.values.iter().sum::<f64>()
    }
}

fn check_dims<S: Scorer + ?Sized>(model: &S, x: &[f64], bg: &Background) -> Result<()> {
    if x.len() != model.n_features() {
        return Err(Error::DimensionMismatch { expected: model.n_features(), found: x.len() });
    }
    if bg.dim != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: bg.dim });
    }
    Ok(())
}

/// Mean score over hybrid rows; `present[j]` takes feature `j` from `x`.
pub fn value_function<S: Scorer + ?Sized>(model: &S, x: &[f64], present: &[bool], bg: &Background) -> f64 {
    let mut hybrid = vec![0.0; x.len()];
    let mut total = 0.0;
    for b in 0..bg.len() {
        let row = bg.row(b);
        for j in 0..x.len() {
            hybrid[j] = if present[j] { x[j] } else { row[j] };
        }
        total += model.score(&hybrid);
    }
    total / bg.len() as f64
}

/// Classic Shapley values by enumerating all `2^N` coalitions.
pub fn shapley_exact<S: Scorer + ?Sized>(model: &S, x: &[f64], bg: &Background, instance: &str) -> Result<AttributionSet> {
    check_dims(model, x, bg)?;
    let n = x.len();
    if n > MAX_EXACT_FEATURES {
        return Err(Error::ShapleyInfeasible(n));
    }
    let mut value = vec![0.0; 1 << n];
    let mut present = vec![false; n];
    for (mask, v) in value.iter_mut().enumerate() {
        for (j, p) in present.iter_mut().enumerate() {
            *p = mask & (1 << j) != 0;
        }
        *v = value_function(model, x, &present, bg);
    }
    // weight[s] = s! (n - s - 1)! / n!
    let mut weight = vec![0.0; n.max(1)];
    for (s, w) in weight.iter_mut().enumerate() {
        let mut acc = 1.0 / n as f64;
        // 1 / (n * C(n-1, s))
        for k in 0..s {
            acc *= (k + 1) as f64 / (n - 1 - k) as f64;
        }
        *w = acc;
    }
    let mut values = vec![0.0; n];
    for (i, phi) in values.iter_mut().enumerate() {
        for mask in 0..(1usize << n) {
            if mask & (1 << i) == 0 {
                let s = mask.count_ones() as usize;
                *phi += weight[s] * (value[mask | (1 << i)] - value[mask]);
            }
        }
    }
    Ok(AttributionSet {
        instance: instance.into(),
        values,
        base_value: value[0],
        score: model.score(x),
        features: x.to_vec(),
    })
}

/// Monte Carlo Shapley values over random feature orderings.
///
/// Every ordering telescopes from the base value to the full score, so the
/// estimate is efficient up to rounding; the remaining residual is spread
/// over features in proportion to `|attribution|` (evenly if all are zero).
pub fn shapley_sample<S: Scorer + ?Sized>(
    model: &S,
    x: &[f64],
    bg: &Background,
    n_permutations: usize,
    seed: u64,
    instance: &str,
) -> Result<AttributionSet> {
    check_dims(model, x, bg)?;
    if n_permutations == 0 {
        return Err(Error::InvalidParameter("n_permutations must be >= 1".into()));
    }
    let n = x.len();
    let mut r = rng::stage_rng(seed, rng::STREAM_SHAPLEY);
    let mut order: Vec<usize> = (0..n).collect();
    let mut values = vec![0.0; n];
    let mut present = vec![false; n];
    let base_value = value_function(model, x, &present, bg);
    for _ in 0..n_permutations {
        rng::shuffle(&mut r, &mut order);
        present.iter_mut().for_each(|p| *p = false);
        let mut prev = base_value;
        for &j in &order {
            present[j] = true;
            let v = value_function(model, x, &present, bg);
            values[j] += v - prev;
            prev = v;
        }
    }
    values.iter_mut().for_each(|v| *v /= n_permutations as f64);
    let score = model.score(x);
    let residual = score - base_value - values.iter().sum::<f64>();
    let mass: f64 = values.iter().map(|v| abs(*v)).sum();
    if residual != 0.0 && n > 0 {
        for v in values.iter_mut() {
            *v += if mass > 0.0 { residual * abs(*v) / mass } else { residual / n as f64 };
        }
    }
    Ok(AttributionSet { instance: instance.into(), values, base_value, score, features: x.to_vec() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: usize,
    pub name: String,
    pub mean_abs: f64,
    /// `(attribution, feature value)` at each explained instance.
    pub points: Vec<(f64, f64)>,
}

/// Features ordered by mean absolute attribution (ties by column), keeping
/// the first `top_k`.
pub fn summary_ranking(sets: &[AttributionSet], names: &[String], top_k: usize) -> Result<Vec<RankedFeature>> {
    let Some(first) = sets.first() else {
        return Err(Error::InvalidInput("summary needs at least one attribution set".into()));
    };
    let n = first.values.len();
    if sets.iter().any(|s| s.values.len() != n) || names.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: names.len() });
    }
    let mut ranked: Vec<RankedFeature> = (0..n)
        .map(|j| RankedFeature {
            feature: j,
            name: names[j].clone(),
            mean_abs: sets.iter().map(|s| abs(s.values[j])).sum::<f64>() / sets.len() as f64,
            points: sets.iter().map(|s| (s.values[j], s.features[j])).collect(),
        })
        .collect();
    ranked.sort_by(|a, b| b.mean_abs.total_cmp(&a.mean_abs).then(a.feature.cmp(&b.feature)));
    ranked.truncate(top_k);
    Ok(ranked)
}
