//! Limited-memory BFGS with a strong-Wolfe line search, shared by the
//! logistic-regression and perceptron trainers, plus a central-difference
//! gradient used as a test oracle.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{abs, dot, norm2, sqrt};

/// A differentiable objective.
pub trait SmoothProblem {
    fn dimension(&self) -> usize;

    /// Returns `f(x)` and writes `grad f(x)` into `grad`.
    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Adapts a closure `|x, grad| -> f(x)` to [`SmoothProblem`].
pub struct FnProblem<F> {
    pub dimension: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> SmoothProblem for FnProblem<F> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(x, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptStatus {
    Converged,
    IterCap,
    LineSearchFail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub minimizer: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub status: OptStatus,
    /// Objective after each accepted step, starting with `f(x0)`.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { memory: 10, max_iter: 1000, grad_tol: 1e-5, c1: 1e-4, c2: 0.9, max_line_search: 40 }
    }
}

struct LineProbe<'a, P: SmoothProblem> {
    problem: &'a P,
    x: &'a [f64],
    dir: &'a [f64],
    trial: Vec<f64>,
    grad: Vec<f64>,
    evals: usize,
}

impl<P: SmoothProblem> LineProbe<'_, P> {
    /// `(phi(alpha), phi'(alpha))`; leaves the trial point and its gradient
    /// in `self.trial` / `self.grad`.
    fn eval(&mut self, alpha: f64) -> (f64, f64) {
        for ((t, x), d) in self.trial.iter_mut().zip(self.x).zip(self.dir) {
            *t = x + alpha * d;
        }
        self.evals += 1;
        let f = self.problem.evaluate(&self.trial, &mut self.grad);
        (f, dot(&self.grad, self.dir))
    }
}

struct Accepted {
    alpha: f64,
    f: f64,
}

fn interpolate(lo: f64, f_lo: f64, d_lo: f64, hi: f64, f_hi: f64, d_hi: f64) -> f64 {
    // Cubic through both endpoints with their slopes, safeguarded to the
    // middle 80% of the bracket; bisection when the cubic is degenerate.
    let d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (lo - hi);
    let disc = d1 * d1 - d_lo * d_hi;
    let (a, b) = (lo.min(hi), lo.max(hi));
    let width = b - a;
    let mid = 0.5 * (lo + hi);
    if disc < 0.0 || !disc.is_finite() {
        return mid;
    }
    let d2 = (hi - lo).signum() * sqrt(disc);
    let denom = d_hi - d_lo + 2.0 * d2;
    if denom == 0.0 || !denom.is_finite() {
        return mid;
    }
    let t = hi - (hi - lo) * (d_hi + d2 - d1) / denom;
    if !t.is_finite() || t < a + 0.1 * width || t > b - 0.1 * width {
        mid
    } else {
        t
    }
}

fn strong_wolfe<P: SmoothProblem>(
    probe: &mut LineProbe<'_, P>,
    f0: f64,
    d0: f64,
    initial: f64,
    opts: &LbfgsOptions,
) -> Option<Accepted> {
    let armijo = |alpha: f64, f: f64| f <= f0 + opts.c1 * alpha * d0;
    let curvature = |d: f64| abs(d) <= -opts.c2 * d0;

    let (mut prev, mut f_prev, mut d_prev) = (0.0, f0, d0);
    let mut alpha = initial;
    let mut bracket = None;
    while probe.evals < opts.max_line_search {
        let (f, d) = probe.eval(alpha);
        if !f.is_finite() || !d.is_finite() {
            // Overshot into an overflow region: treat as a failed long step.
            bracket = Some((prev, f_prev, d_prev, alpha, f64::INFINITY, f64::NAN));
            break;
        }
        if !armijo(alpha, f) || (prev > 0.0 && f >= f_prev) {
            bracket = Some((prev, f_prev, d_prev, alpha, f, d));
            break;
        }
        if curvature(d) {
            return Some(Accepted { alpha, f });
        }
        if d >= 0.0 {
            bracket = Some((alpha, f, d, prev, f_prev, d_prev));
            break;
        }
        prev = alpha;
        f_prev = f;
        d_prev = d;
        alpha *= 2.0;
    }
    let (mut lo, mut f_lo, mut d_lo, mut hi, mut f_hi, mut d_hi) = bracket?;
    while probe.evals < opts.max_line_search {
        let alpha = if f_hi.is_finite() && d_hi.is_finite() {
            interpolate(lo, f_lo, d_lo, hi, f_hi, d_hi)
        } else {
            0.5 * (lo + hi)
        };
        if abs(hi - lo) < 1e-16 * alpha.max(1.0) {
            break;
        }
        let (f, d) = probe.eval(alpha);
        if !f.is_finite() || !d.is_finite() {
            hi = alpha;
            f_hi = f64::INFINITY;
            d_hi = f64::NAN;
            continue;
        }
        if !armijo(alpha, f) || f >= f_lo {
            hi = alpha;
            f_hi = f;
            d_hi = d;
        } else {
            if curvature(d) {
                return Some(Accepted { alpha, f });
            }
            if d * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
                d_hi = d_lo;
            }
            lo = alpha;
            f_lo = f;
            d_lo = d;
        }
    }
    // No strong-Wolfe point; settle for the best sufficient-decrease point.
    (lo > 0.0 && f_lo < f0).then_some(Accepted { alpha: lo, f: f_lo })
}

/// Minimizes `problem` from `x0`.
///
/// Search directions come from the two-loop recursion over the last
/// `opts.memory` curvature pairs. Stops when `|grad f| <= grad_tol`
/// (Converged), after `max_iter` accepted steps (IterCap), or when the line
/// search cannot make progress (LineSearchFail, returning the best point).
pub fn lbfgs_minimize<P: SmoothProblem>(problem: &P, x0: &[f64], opts: &LbfgsOptions) -> Result<OptResult> {
    let n = problem.dimension();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
    }
    if opts.memory == 0 {
        return Err(Error::InvalidParameter("L-BFGS memory must be at least 1".into()));
    }
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = problem.evaluate(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(format!("non-finite objective or gradient at start (f = {f})")));
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut dir = vec![0.0; n];
    let mut alphas = vec![0.0; opts.memory];

    let status = loop {
        let gnorm = norm2(&g);
        if gnorm <= opts.grad_tol {
            break OptStatus::Converged;
        }
        if iterations >= opts.max_iter {
            break OptStatus::IterCap;
        }

        // Two-loop recursion: dir = -H g.
        dir.copy_from_slice(&g);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &dir);
            alphas[k] = a;
            for (d, yi) in dir.iter_mut().zip(y) {
                *d -= a * yi;
            }
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &dir);
            for (d, si) in dir.iter_mut().zip(s) {
                *d += (alphas[k] - b) * si;
            }
        }
        dir.iter_mut().for_each(|d| *d = -*d);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) || !slope.is_finite() {
            history.clear();
            for (d, gi) in dir.iter_mut().zip(&g) {
                *d = -gi;
            }
            slope = -gnorm * gnorm;
        }
        let initial = if history.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };

        let mut probe = LineProbe { problem, x: &x, dir: &dir, trial: vec![0.0; n], grad: vec![0.0; n], evals: 0 };
        let Some(step) = strong_wolfe(&mut probe, f, slope, initial, opts) else {
            break OptStatus::LineSearchFail;
        };
        // The probe may have evaluated other points after the accepted one.
        let (f_new, _) = if probe.trial.iter().zip(&x).zip(&dir).all(|((t, xi), d)| *t == xi + step.alpha * d) {
            (step.f, 0.0)
        } else {
            probe.eval(step.alpha)
        };
        let new_x = core::mem::take(&mut probe.trial);
        let new_g = core::mem::take(&mut probe.grad);
        let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = new_x;
        g = new_g;
        f = f_new;
        iterations += 1;
        trace.push(f);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite gradient after accepted step".into()));
        }
    };
    Ok(OptResult { gradient_norm: norm2(&g), minimizer: x, value: f, iterations, status, trace })
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_diff_gradient(objective: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = objective(&probe);
        probe[i] = x[i] - h;
        let down = objective(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite objective near coordinate {i}")));
        }
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}
