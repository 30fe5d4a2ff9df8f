//! Soft-margin kernel SVM trained by sequential minimal optimization.
//!
//! The solver works on the dual
//!
//! ```text
//! min_a  1/2 a'Qa - e'a    s.t.  0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! picking the maximal-violating pair with second-order working-set
//! selection and keeping the dual gradient up to date. Training stops when
//! the KKT gap drops below `kkt_tol` or after `epoch_cap` epochs, one epoch
//! being `n` pair updates.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, exp, powf, tanh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Poly,
    Sigmoid,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Polynomial degree.
    pub degree: u32,
    /// Sigmoid offset `r`.
    pub coef0: f64,
    /// RBF `gamma = 1 / (2 sigma^2)`.
    pub gamma: f64,
}

impl KernelSpec {
    pub fn linear() -> Self {
        KernelSpec { kind: KernelKind::Linear, degree: 3, coef0: 0.0, gamma: 1.0 }
    }

    pub fn poly(degree: u32) -> Self {
        KernelSpec { kind: KernelKind::Poly, degree, ..Self::linear() }
    }

    pub fn sigmoid(coef0: f64) -> Self {
        KernelSpec { kind: KernelKind::Sigmoid, coef0, ..Self::linear() }
    }

    pub fn rbf_sigma(sigma: f64) -> Self {
        KernelSpec { kind: KernelKind::Rbf, gamma: 1.0 / (2.0 * sigma * sigma), ..Self::linear() }
    }

    pub fn rbf_gamma(gamma: f64) -> Self {
        KernelSpec { kind: KernelKind::Rbf, gamma, ..Self::linear() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::InvalidParameter("polynomial degree must be >= 1".into()));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("kernel gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }

    #[inline]
    fn apply(&self, u: &[f64], v: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => dot(u, v),
            KernelKind::Poly => powf(dot(u, v) + 1.0, self.degree as f64),
            KernelKind::Sigmoid => tanh(dot(u, v) + self.coef0),
            KernelKind::Rbf => {
                let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                exp(-self.gamma * d2)
            }
        }
    }
}

/// `K(u, v)` for the configured kernel.
pub fn kernel_eval(spec: &KernelSpec, u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), found: v.len() });
    }
    Ok(spec.apply(u, v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoOptions {
    pub c: f64,
    /// `None` runs until the KKT gap closes.
    pub epoch_cap: Option<usize>,
    pub kkt_tol: f64,
    /// Kernel-row cache budget in bytes.
    pub cache_bytes: usize,
}

impl Default for SmoOptions {
    fn default() -> Self {
        SmoOptions { c: 1.0, epoch_cap: Some(5), kkt_tol: 1e-3, cache_bytes: 256 << 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision offset: `f(x) = sum a_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    /// `max_{I_up} -y G - min_{I_low} -y G` at termination.
    pub kkt_gap: f64,
    pub converged: bool,
}

struct KernelRows<'a> {
    rows: &'a [f64],
    dim: usize,
    n: usize,
    kernel: KernelSpec,
    cache: BTreeMap<usize, Vec<f64>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn point(&self, i: usize) -> &'a [f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if !self.cache.contains_key(&i) {
            if self.cache.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.cache.remove(&old);
                }
            }
            let xi = self.point(i);
            let r: Vec<f64> = (0..self.n).map(|t| self.kernel.apply(xi, self.point(t))).collect();
            self.cache.insert(i, r);
            self.order.push_back(i);
        }
        &self.cache[&i]
    }
}

/// Solves the SVM dual for row-major `rows` (`n x dim`) and labels `y` in
/// `{-1, +1}`.
pub fn smo_solve(rows: &[f64], dim: usize, y: &[f64], kernel: &KernelSpec, opts: &SmoOptions) -> Result<SmoSolution> {
    let n = y.len();
    if rows.len() != n * dim {
        return Err(Error::DimensionMismatch { expected: n * dim, found: rows.len() });
    }
    if !y.iter().any(|&v| v > 0.0) || !y.iter().any(|&v| v < 0.0) {
        return Err(Error::DegenerateTraining("SVM needs both labels".into()));
    }
    if !(opts.c > 0.0) {
        return Err(Error::InvalidParameter(format!("penalty c must be positive, got {}", opts.c)));
    }
    kernel.validate()?;
    const TAU: f64 = 1e-12;
    let c = opts.c;
    let capacity = (opts.cache_bytes / (8 * n.max(1))).clamp(2, n.max(2));
    let mut k = KernelRows { rows, dim, n, kernel: *kernel, cache: BTreeMap::new(), order: VecDeque::new(), capacity };
    let diag: Vec<f64> = (0..n).map(|i| kernel.apply(k.point(i), k.point(i))).collect();

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = opts.epoch_cap.map(|e| e.saturating_mul(n));
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let (gap, converged) = loop {
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > g_max {
                g_max = -y[t] * grad[t];
                i_sel = t;
            }
        }
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            if in_low(alpha[t], y[t]) {
                g_min = g_min.min(-y[t] * grad[t]);
            }
        }
        let gap = g_max - g_min;
        if i_sel == usize::MAX || gap < opts.kkt_tol {
            break (gap.max(0.0), true);
        }
        if max_iter.is_some_and(|m| iterations >= m) {
            break (gap, false);
        }
        let i = i_sel;
        let k_i = k.row(i).to_vec();
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let b = g_max + y[t] * grad[t];
            if b > 0.0 {
                let mut a = diag[i] + diag[t] - 2.0 * k_i[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j_sel = t;
                }
            }
        }
        if j_sel == usize::MAX {
            break (gap, true);
        }
        let j = j_sel;
        let k_j = k.row(j).to_vec();
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = diag[i] + diag[j] - 2.0 * k_i[j];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k_i[t] * di + y[j] * k_j[t] * dj);
        }
        iterations += 1;
    };

    // Offset from free vectors; midpoint of the feasible range otherwise.
    let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };
    Ok(SmoSolution { alpha, rho, iterations, kkt_gap: gap, converged })
}

/// `1/2 a'Qa - e'a` for an explicit Gram matrix.
pub fn dual_objective(alpha: &[f64], y: &[f64], gram: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[i * n + j];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub c: f64,
    pub dim: usize,
    /// Row-major support vectors.
    pub support_vectors: Vec<f64>,
    /// `a_i y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
}

impl SvmModel {
    /// Trains on rows that are already scaled.
    pub fn fit(rows: &[f64], dim: usize, y: &[f64], kernel: KernelSpec, opts: &SmoOptions) -> Result<Self> {
        let sol = smo_solve(rows, dim, y, &kernel, opts)?;
        let mut support_vectors = Vec::new();
        let mut dual_coef = Vec::new();
        for (i, a) in sol.alpha.iter().enumerate() {
            if *a > 0.0 {
                support_vectors.extend_from_slice(&rows[i * dim..(i + 1) * dim]);
                dual_coef.push(a * y[i]);
            }
        }
        Ok(SvmModel { kernel, c: opts.c, dim, support_vectors, dual_coef, bias: -sol.rho, converged: sol.converged })
    }

    /// `sum a_i y_i K(x, x_i) + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut s = self.bias;
        for (sv, coef) in self.support_vectors.chunks(self.dim.max(1)).zip(&self.dual_coef) {
            s += coef * self.kernel.apply(x, sv);
        }
        s
    }

    pub fn n_support(&self) -> usize {
        self.dual_coef.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn converged() -> SmoOptions {
        SmoOptions { c: 1e6, epoch_cap: None, kkt_tol: 1e-9, ..Default::default() }
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_eval(&KernelSpec::rbf_sigma(0.7), &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(kernel_eval(&KernelSpec::poly(3), &[1.0, 0.0], &[1.0, 0.0]).unwrap(), 8.0);
        assert_eq!(kernel_eval(&KernelSpec::sigmoid(0.0), &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(kernel_eval(&KernelSpec::linear(), &[1.0], &[1.0, 2.0]).is_err());
        let sigma = 2.0f64;
        let k = kernel_eval(&KernelSpec::rbf_sigma(sigma), &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((k - (-25.0 / (2.0 * sigma * sigma)).exp()).abs() < 1e-15);
    }

    #[test]
    fn invalid_kernels_rejected() {
        assert!(KernelSpec::poly(0).validate().is_err());
        assert!(KernelSpec::rbf_gamma(0.0).validate().is_err());
    }

    #[test]
    fn two_point_max_margin() {
        let rows = [-1.0, 0.0, 1.0, 0.0];
        let y = [-1.0, 1.0];
        let m = SvmModel::fit(&rows, 2, &y, KernelSpec::linear(), &converged()).unwrap();
        assert_eq!(m.n_support(), 2);
        assert!((m.decision(&[2.0, 0.0]) - 2.0).abs() < 1e-9);
        assert!(m.decision(&[0.0, 5.0]).abs() < 1e-9);
        assert!((m.decision(&[1.0, 0.0]) - 1.0).abs() < 1e-9);
        assert!((m.decision(&[-1.0, 0.0]) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_class_rejected() {
        let r = smo_solve(&[1.0, 2.0], 1, &[1.0, 1.0], &KernelSpec::linear(), &converged());
        assert!(matches!(r, Err(Error::DegenerateTraining(_))));
    }

    #[test]
    fn xor_is_not_linearly_separable() {
        let rows = [0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let y = [-1.0, -1.0, 1.0, 1.0];
        let m = SvmModel::fit(&rows, 2, &y, KernelSpec::linear(), &SmoOptions { epoch_cap: Some(50), ..Default::default() }).unwrap();
        let correct = rows.chunks(2).zip(&y).filter(|(x, &t)| (m.decision(x) > 0.0) == (t > 0.0)).count();
        assert!(correct <= 3);
        let rbf = SvmModel::fit(&rows, 2, &y, KernelSpec::rbf_gamma(2.0), &SmoOptions { c: 100.0, epoch_cap: None, kkt_tol: 1e-6, ..Default::default() }).unwrap();
        let correct = rows.chunks(2).zip(&y).filter(|(x, &t)| (rbf.decision(x) > 0.0) == (t > 0.0)).count();
        assert_eq!(correct, 4);
    }

    #[test]
    fn duplicated_points_keep_decision_function() {
        let rows = [0.0, 0.0, 0.5, 1.0, 2.0, 2.0, 3.0, 1.5, 1.0, 0.2];
        let y = [-1.0, -1.0, 1.0, 1.0, -1.0];
        let doubled: Vec<f64> = rows.iter().chain(rows.iter()).copied().collect();
        let y2: Vec<f64> = y.iter().chain(y.iter()).copied().collect();
        let a = SvmModel::fit(&rows, 2, &y, KernelSpec::linear(), &converged()).unwrap();
        let b = SvmModel::fit(&doubled, 2, &y2, KernelSpec::linear(), &converged()).unwrap();
        for p in [[0.0, 0.0], [1.0, 1.0], [2.5, 0.5], [-1.0, 3.0]] {
            assert!((a.decision(&p) - b.decision(&p)).abs() < 1e-6);
        }
    }

    #[test]
    fn free_support_vectors_sit_on_margin() {
        let mut r = rng::stage_rng(5, 0);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..30 {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            rows.push(label * 1.0 + rng::unit(&mut r) * 1.5 - 0.75);
            rows.push(rng::unit(&mut r) * 2.0 - 1.0);
            y.push(label);
        }
        let opts = SmoOptions { c: 1.0, epoch_cap: None, kkt_tol: 1e-6, ..Default::default() };
        for kernel in [KernelSpec::linear(), KernelSpec::rbf_gamma(0.5), KernelSpec::poly(2)] {
            let sol = smo_solve(&rows, 2, &y, &kernel, &opts).unwrap();
            assert!(sol.converged);
            let model = SvmModel::fit(&rows, 2, &y, kernel, &opts).unwrap();
            let eq: f64 = sol.alpha.iter().zip(&y).map(|(a, t)| a * t).sum();
            assert!(eq.abs() < 1e-9);
            for (t, a) in sol.alpha.iter().enumerate() {
                assert!(*a >= 0.0 && *a <= opts.c);
                if *a > 1e-8 && *a < opts.c - 1e-8 {
                    let f = model.decision(&rows[2 * t..2 * t + 2]);
                    assert!((f.abs() - 1.0).abs() <= 1e-5, "free SV {t} has |f| = {}", f.abs());
                }
            }
        }
    }

    #[test]
    fn epoch_cap_limits_work() {
        let rows: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let s = smo_solve(&rows, 2, &y, &KernelSpec::rbf_gamma(1.0), &SmoOptions { epoch_cap: Some(1), kkt_tol: 0.0, ..Default::default() }).unwrap();
        assert!(s.iterations <= 20);
    }

    #[test]
    fn zero_vector_with_antisymmetric_data() {
        let rows = [1.0, 2.0, -1.0, -2.0, 2.0, 0.5, -2.0, -0.5];
        let y = [1.0, -1.0, 1.0, -1.0];
        let m = SvmModel::fit(&rows, 2, &y, KernelSpec::linear(), &converged()).unwrap();
        assert!(m.bias.abs() < 1e-9);
        assert!(m.decision(&[0.0, 0.0]).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn kernels_are_symmetric(u in proptest::collection::vec(-2.0f64..2.0, 4), v in proptest::collection::vec(-2.0f64..2.0, 4)) {
            for k in [KernelSpec::linear(), KernelSpec::poly(3), KernelSpec::sigmoid(0.3), KernelSpec::rbf_gamma(0.8)] {
                prop_assert_eq!(kernel_eval(&k, &u, &v).unwrap(), kernel_eval(&k, &v, &u).unwrap());
            }
        }
    }
}

#[cfg(test)]
mod dual_oracle {
    use super::*;
    use proptest::prelude::*;

    /// Makes an arbitrary box point satisfy `y'a = 0` by shrinking the heavier side.
    fn feasible(raw: &[f64], y: &[f64]) -> Vec<f64> {
        let pos: f64 = raw.iter().zip(y).filter(|(_, t)| **t > 0.0).map(|(a, _)| a).sum();
        let neg: f64 = raw.iter().zip(y).filter(|(_, t)| **t < 0.0).map(|(a, _)| a).sum();
        raw.iter()
            .zip(y)
            .map(|(a, t)| {
                if *t > 0.0 && pos > 0.0 { a * pos.min(neg) / pos } else if *t < 0.0 && neg > 0.0 { a * pos.min(neg) / neg } else { *a }
            })
            .collect()
    }

    fn gram(rows: &[f64], dim: usize, k: &KernelSpec) -> Vec<f64> {
        let n = rows.len() / dim;
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = kernel_eval(k, &rows[i * dim..(i + 1) * dim], &rows[j * dim..(j + 1) * dim]).unwrap();
            }
        }
        g
    }

    /// Euclidean projection onto `{0 <= a <= c, y'a = 0}` by bisection on
    /// the multiplier of the equality constraint.
    fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
        let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect() };
        let g = |mu: f64| at(mu).iter().zip(y).map(|(a, t)| a * t).sum::<f64>();
        let bound = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 { lo = mid } else { hi = mid }
        }
        at(0.5 * (lo + hi))
    }

    /// Projected gradient descent on the dual with step `1 / trace(Q)`.
    fn pgd_dual(gram: &[f64], y: &[f64], c: f64) -> f64 {
        let n = y.len();
        let step = 1.0 / (0..n).map(|i| gram[i * n + i]).sum::<f64>().max(1e-12);
        let mut a = vec![0.0; n];
        for _ in 0..50_000 {
            let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * gram[i * n + j] * a[j]).sum::<f64>() - 1.0).collect();
            let v: Vec<f64> = a.iter().zip(&grad).map(|(ai, gi)| ai - step * gi).collect();
            a = project(&v, y, c);
        }
        dual_objective(&a, y, gram)
    }

    #[test]
    fn dual_objective_matches_projected_gradient() {
        for seed in 0..6u64 {
            let mut r = crate::rng::stage_rng(seed, 0);
            let n = 4 + (seed as usize % 5);
            let rows: Vec<f64> = (0..2 * n).map(|_| crate::rng::unit(&mut r) * 4.0 - 2.0).collect();
            let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            for kernel in [KernelSpec::linear(), KernelSpec::rbf_gamma(0.7)] {
                let opts = SmoOptions { c: 1.0, epoch_cap: None, kkt_tol: 1e-9, ..Default::default() };
                let sol = smo_solve(&rows, 2, &y, &kernel, &opts).unwrap();
                let g = gram(&rows, 2, &kernel);
                let smo = dual_objective(&sol.alpha, &y, &g);
                let oracle = pgd_dual(&g, &y, 1.0);
                assert!((smo - oracle).abs() < 1e-3, "seed {seed}: smo {smo}, oracle {oracle}");
                let eq: f64 = sol.alpha.iter().zip(&y).map(|(a, t)| a * t).sum();
                assert!(eq.abs() < 1e-9);
                assert!(sol.alpha.iter().all(|a| (0.0..=1.0).contains(a)));
            }
        }
    }

    /// Lower bound on the smallest eigenvalue: power iteration on
    /// `s I - K` with `s` at least the largest eigenvalue.
    fn min_eigenvalue_bound(k: &[f64], n: usize) -> f64 {
        let s = (0..n).map(|i| (0..n).map(|j| k[i * n + j].abs()).sum::<f64>()).fold(0.0, f64::max);
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
        let mut rayleigh = 0.0;
        for _ in 0..5000 {
            let w: Vec<f64> = (0..n).map(|i| s * v[i] - (0..n).map(|j| k[i * n + j] * v[j]).sum::<f64>()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            rayleigh = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / v.iter().map(|x| x * x).sum::<f64>();
            v = w.into_iter().map(|x| x / norm).collect();
        }
        s - rayleigh
    }

    #[test]
    fn rbf_gram_is_positive_semidefinite() {
        for seed in 0..5u64 {
            let mut r = crate::rng::stage_rng(seed, 9);
            let rows: Vec<f64> = (0..30 * 3).map(|_| crate::rng::unit(&mut r) * 3.0).collect();
            let g = gram(&rows, 3, &KernelSpec::rbf_gamma(0.5));
            assert!(min_eigenvalue_bound(&g, 30) >= -1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn solution_beats_random_feasible_points(
            pts in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 6),
            trials in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 6), 20),
        ) {
            let rows: Vec<f64> = pts.iter().flat_map(|(a, b)| [*a, *b]).collect();
            let y = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
            let kernel = KernelSpec::rbf_gamma(0.5);
            let opts = SmoOptions { c: 1.0, epoch_cap: None, kkt_tol: 1e-8, ..Default::default() };
            let sol = smo_solve(&rows, 2, &y, &kernel, &opts).unwrap();
            let mut gram = vec![0.0; 36];
            for i in 0..6 {
                for j in 0..6 {
                    gram[i * 6 + j] = kernel_eval(&kernel, &rows[2 * i..2 * i + 2], &rows[2 * j..2 * j + 2]).unwrap();
                }
            }
            let best = dual_objective(&sol.alpha, &y, &gram);
            for raw in &trials {
                let a = feasible(raw, &y);
                prop_assert!(best <= dual_objective(&a, &y, &gram) + 1e-7);
            }
        }
    }
}
