//! Per-feature rescaling fitted on training rows.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::vectorize::FeatureMatrix;

/// Divides each feature by its training maximum absolute value, mapping
/// counts into `[0, 1]`. Features that are zero throughout pass unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxScaler {
    pub divisors: Vec<f64>,
}

impl MaxScaler {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let mut divisors = vec![0.0f64; x.n_features];
        for row in x.rows() {
            for (d, v) in divisors.iter_mut().zip(row) {
                *d = d.max(crate::math::abs(*v));
            }
        }
        divisors.iter_mut().for_each(|d| {
            if *d == 0.0 {
                *d = 1.0
            }
        });
        MaxScaler { divisors }
    }

    pub fn transform_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.extend(row.iter().zip(&self.divisors).map(|(v, d)| v / d));
    }

    pub fn transform(&self, data: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(data.len());
        for row in data.chunks(self.divisors.len().max(1)) {
            self.transform_row(row, &mut out);
        }
        out
    }
}

/// Zero mean, unit variance per feature (population variance of the
/// training rows). Constant features are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let n = x.n_rows() as f64;
        let mut means = vec![0.0; x.n_features];
        for row in x.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; x.n_features];
        for row in x.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scales = var.into_iter().map(|v| if v > 0.0 { crate::math::sqrt(v) } else { 1.0 }).collect();
        Standardizer { means, scales }
    }

    pub fn transform(&self, data: &[f64]) -> Vec<f64> {
        let k = self.means.len().max(1);
        data.iter().enumerate().map(|(i, v)| (v - self.means[i % k]) / self.scales[i % k]).collect()
    }
}
