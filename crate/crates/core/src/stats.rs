//! Paired t-tests across repeated runs with Bonferroni correction.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{abs, exp, ln, ln_gamma, mean, sample_std, sqrt};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Per-repeat scores of two models, paired by repeat index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSamples {
    pub model_a: String,
    pub model_b: String,
    pub scores_a: Vec<f64>,
    pub scores_b: Vec<f64>,
}

/// `(t, df)` on the differences `a - b`.
///
/// Differences with zero spread give `t = 0` when they are all zero and an
/// infinite `t` of the mean's sign otherwise.
pub fn paired_ttest(s: &PairedSamples) -> Result<(f64, f64)> {
    if s.scores_a.len() != s.scores_b.len() {
        return Err(Error::DimensionMismatch { expected: s.scores_a.len(), found: s.scores_b.len() });
    }
    let n = s.scores_a.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    let d: Vec<f64> = s.scores_a.iter().zip(&s.scores_b).map(|(a, b)| a - b).collect();
    let m = mean(&d).unwrap_or(0.0);
    let sd = sample_std(&d).unwrap_or(0.0);
    let df = (n - 1) as f64;
    let t = if sd > 0.0 {
        m / (sd / sqrt(n as f64))
    } else if m == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(m)
    };
    Ok((t, df))
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if abs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if abs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * ln(x) + b * ln(1.0 - x);
    let front = exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub model_a: String,
    pub model_b: String,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_two_sided: f64,
    /// `min(1, p * m)` with `m` the number of comparisons.
    pub p_adjusted: f64,
    pub significant: bool,
}

/// All pairwise comparisons among a set of models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub models: Vec<String>,
    /// Pairs `(i, j)` with `i < j`, row by row.
    pub pairs: Vec<TTestResult>,
}

impl SignificanceMatrix {
    /// Result for models `i` and `j` oriented as `i` versus `j`. The
    /// diagonal compares a model with itself and is never significant.
    pub fn get(&self, i: usize, j: usize) -> TTestResult {
        let m = self.models.len();
        if i == j {
            return TTestResult {
                model_a: self.models[i].clone(),
                model_b: self.models[i].clone(),
                t_statistic: 0.0,
                degrees_of_freedom: f64::NAN,
                p_two_sided: 1.0,
                p_adjusted: 1.0,
                significant: false,
            };
        }
        let (lo, hi) = (i.min(j), i.max(j));
        let idx = lo * (2 * m - lo - 1) / 2 + (hi - lo - 1);
        let mut r = self.pairs[idx].clone();
        if i > j {
            core::mem::swap(&mut r.model_a, &mut r.model_b);
            r.t_statistic = -r.t_statistic;
        }
        r
    }
}

/// Paired t-tests over every pair of models. `scores[m][r]` is model `m`'s
/// score in repeat `r`; Bonferroni uses `m = C(M, 2)`.
pub fn compare_all(models: &[String], scores: &[Vec<f64>]) -> Result<SignificanceMatrix> {
    if models.len() != scores.len() {
        return Err(Error::DimensionMismatch { expected: models.len(), found: scores.len() });
    }
    if models.len() < 2 {
        return Err(Error::InvalidInput("comparison needs at least 2 models".into()));
    }
    let m = models.len() * (models.len() - 1) / 2;
    let mut pairs = Vec::with_capacity(m);
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let s = PairedSamples {
                model_a: models[i].clone(),
                model_b: models[j].clone(),
                scores_a: scores[i].clone(),
                scores_b: scores[j].clone(),
            };
            let (t, df) = paired_ttest(&s)?;
            let p = student_t_two_sided_p(t, df);
            let p_adjusted = (p * m as f64).min(1.0);
            pairs.push(TTestResult {
                model_a: s.model_a,
                model_b: s.model_b,
                t_statistic: t,
                degrees_of_freedom: df,
                p_two_sided: p,
                p_adjusted,
                significant: p_adjusted < SIGNIFICANCE_LEVEL,
            });
        }
    }
    Ok(SignificanceMatrix { models: models.to_vec(), pairs })
}
