//! Logistic regression and a one-output multilayer perceptron, both fitted
//! by L-BFGS on an explicit loss and gradient.
//!
//! Targets are `y in {0, 1}` with spam as 1. Inputs are expected to be
//! standardized by the caller.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, sigmoid, softplus, sqrt};
use crate::numopt::{lbfgs_minimize, LbfgsOptions, OptStatus, SmoothProblem};
use crate::rng;

fn check_training(rows: &[f64], dim: usize, y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::DegenerateTraining("no training rows".into()));
    }
    if rows.len() != y.len() * dim {
        return Err(Error::DimensionMismatch { expected: y.len() * dim, found: rows.len() });
    }
    if !y.iter().any(|&v| v > 0.5) || !y.iter().any(|&v| v < 0.5) {
        return Err(Error::DegenerateTraining("training data holds a single class".into()));
    }
    Ok(())
}

/// Penalized negative log-likelihood of logistic regression over the
/// parameter vector `[b0, b1..bN]`; the intercept is not penalized.
pub struct LogRegProblem<'a> {
    pub rows: &'a [f64],
    pub dim: usize,
    pub y: &'a [f64],
    pub l2: f64,
}

impl SmoothProblem for LogRegProblem<'_> {
    fn dimension(&self) -> usize {
        self.dim + 1
    }

    fn evaluate(&self, beta: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (b0, w) = (beta[0], &beta[1..]);
        let mut loss = 0.0;
        for (row, &t) in self.rows.chunks(self.dim.max(1)).zip(self.y) {
            let z = b0 + dot(w, row);
            loss += softplus(z) - t * z;
            let r = sigmoid(z) - t;
            grad[0] += r;
            for (g, v) in grad[1..].iter_mut().zip(row) {
                *g += r * v;
            }
        }
        for (g, wj) in grad[1..].iter_mut().zip(w) {
            *g += self.l2 * wj;
        }
        loss + 0.5 * self.l2 * dot(w, w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub l2_strength: f64,
}

impl LogRegModel {
    pub fn fit(rows: &[f64], dim: usize, y: &[f64], l2_strength: f64, max_iter: usize) -> Result<Self> {
        check_training(rows, dim, y)?;
        if !(l2_strength >= 0.0) {
            return Err(Error::InvalidParameter(format!("l2 strength must be >= 0, got {l2_strength}")));
        }
        let problem = LogRegProblem { rows, dim, y, l2: l2_strength };
        let opts = LbfgsOptions { max_iter, ..Default::default() };
        let res = lbfgs_minimize(&problem, &vec![0.0; dim + 1], &opts)?;
        if !res.minimizer.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalFailure("logistic regression diverged".into()));
        }
        Ok(LogRegModel { intercept: res.minimizer[0], weights: res.minimizer[1..].to_vec(), l2_strength })
    }

    pub fn linear_score(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.weights, x)
    }

    pub fn proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_score(x))
    }
}

/// Fully connected rectifier network with a single logistic output.
///
/// Parameters are flattened layer by layer as the weight matrix (row-major,
/// `out x in`) followed by the bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// `[inputs, hidden.., 1]`.
    pub layer_sizes: Vec<usize>,
    pub params: Vec<f64>,
    pub l2: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpOptions {
    pub max_iter: usize,
    pub l2: f64,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for MlpOptions {
    fn default() -> Self {
        MlpOptions { max_iter: 10_000, l2: 1e-4, grad_tol: 1e-4, seed: 0 }
    }
}

/// `(weight offset, bias offset)` of each layer in the flat vector.
fn layout(sizes: &[usize]) -> (Vec<(usize, usize)>, usize) {
    let mut offsets = Vec::with_capacity(sizes.len().saturating_sub(1));
    let mut at = 0;
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        offsets.push((at, at + fan_in * fan_out));
        at += fan_in * fan_out + fan_out;
    }
    (offsets, at)
}

/// Mean cross-entropy plus `l2 / (2n)` times the squared weights (biases
/// excluded).
pub struct MlpProblem<'a> {
    pub sizes: &'a [usize],
    pub rows: &'a [f64],
    pub y: &'a [f64],
    pub l2: f64,
}

/// Forward pass storing every layer's activations; returns the output logit.
fn forward(sizes: &[usize], offsets: &[(usize, usize)], params: &[f64], x: &[f64], acts: &mut Vec<Vec<f64>>) -> f64 {
    acts.clear();
    acts.push(x.to_vec());
    let last = sizes.len() - 2;
    for (l, w) in sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let (wo, bo) = offsets[l];
        let input = &acts[l];
        let mut out = Vec::with_capacity(fan_out);
        for j in 0..fan_out {
            let z = params[bo + j] + dot(&params[wo + j * fan_in..wo + (j + 1) * fan_in], input);
            out.push(if l == last { z } else { z.max(0.0) });
        }
        acts.push(out);
    }
    acts[sizes.len() - 1][0]
}

impl SmoothProblem for MlpProblem<'_> {
    fn dimension(&self) -> usize {
        layout(self.sizes).1
    }

    fn evaluate(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let (offsets, _) = layout(self.sizes);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let n = self.y.len() as f64;
        let dim = self.sizes[0];
        let mut acts = Vec::new();
        let mut loss = 0.0;
        for (x, &t) in self.rows.chunks(dim.max(1)).zip(self.y) {
            let z = forward(self.sizes, &offsets, params, x, &mut acts);
            loss += softplus(z) - t * z;
            let mut delta = vec![(sigmoid(z) - t) / n];
            for l in (0..self.sizes.len() - 1).rev() {
                let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
                let (wo, bo) = offsets[l];
                let input = &acts[l];
                for j in 0..fan_out {
                    grad[bo + j] += delta[j];
                    let gw = &mut grad[wo + j * fan_in..wo + (j + 1) * fan_in];
                    for (g, a) in gw.iter_mut().zip(input) {
                        *g += delta[j] * a;
                    }
                }
                if l > 0 {
                    let mut prev = vec![0.0; fan_in];
                    for j in 0..fan_out {
                        let row = &params[wo + j * fan_in..wo + (j + 1) * fan_in];
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += delta[j] * w;
                        }
                    }
                    for (p, a) in prev.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        let mut penalty = 0.0;
        for &(wo, bo) in &offsets {
            for k in wo..bo {
                penalty += params[k] * params[k];
                grad[k] += self.l2 / n * params[k];
            }
        }
        loss / n + 0.5 * self.l2 / n * penalty
    }
}

impl MlpModel {
    /// Uniform initialization in `+- sqrt(6 / fan_in)` for weights, zero biases.
    pub fn initial_params(sizes: &[usize], seed: u64) -> Vec<f64> {
        let (offsets, total) = layout(sizes);
        let mut params = vec![0.0; total];
        let mut r = rng::stage_rng(seed, rng::STREAM_FIT);
        for (l, w) in sizes.windows(2).enumerate() {
            let bound = sqrt(6.0 / w[0].max(1) as f64);
            let (wo, bo) = offsets[l];
            for p in &mut params[wo..bo] {
                *p = (2.0 * rng::unit(&mut r) - 1.0) * bound;
            }
        }
        params
    }

    pub fn fit(rows: &[f64], dim: usize, y: &[f64], hidden: &[usize], opts: &MlpOptions) -> Result<Self> {
        check_training(rows, dim, y)?;
        if hidden.contains(&0) {
            return Err(Error::InvalidParameter("hidden layers need at least one unit".into()));
        }
        let mut sizes = vec![dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let problem = MlpProblem { sizes: &sizes, rows, y, l2: opts.l2 };
        let x0 = Self::initial_params(&sizes, opts.seed);
        let lbfgs = LbfgsOptions { max_iter: opts.max_iter, grad_tol: opts.grad_tol, ..Default::default() };
        let res = lbfgs_minimize(&problem, &x0, &lbfgs)?;
        if !res.value.is_finite() || !res.minimizer.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalFailure("perceptron loss became non-finite".into()));
        }
        Ok(MlpModel {
            layer_sizes: sizes,
            params: res.minimizer,
            l2: opts.l2,
            iterations: res.iterations,
            converged: res.status == OptStatus::Converged,
        })
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let (offsets, _) = layout(&self.layer_sizes);
        forward(&self.layer_sizes, &offsets, &self.params, x, &mut Vec::new())
    }

    pub fn proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Offset of the output unit's bias in [`MlpModel::params`].
    pub fn output_bias_index(&self) -> usize {
        self.params.len() - 1
    }
}
