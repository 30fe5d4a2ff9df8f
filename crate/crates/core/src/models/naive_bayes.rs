//! Multinomial, Gaussian and Bernoulli naive Bayes.
//!
//! All three keep per-class log quantities and score a document as
//! `log P(spam | x) - log P(ham | x)` up to terms shared by both classes.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::math::{ln, ln_1p};
use crate::vectorize::FeatureMatrix;

fn log_priors(x: &FeatureMatrix) -> [f64; 2] {
    let n = x.n_rows() as f64;
    Label::ALL.map(|l| ln(x.class_count(l) as f64 / n))
}

/// Normalizes two log scores into log posteriors.
pub fn normalize_log(scores: [f64; 2]) -> [f64; 2] {
    let m = scores[0].max(scores[1]);
    let lse = m + ln(crate::math::exp(scores[0] - m) + crate::math::exp(scores[1] - m));
    [scores[0] - lse, scores[1] - lse]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnbModel {
    /// Indexed by `Label::index()`.
    pub log_priors: [f64; 2],
    /// Per class, `log((F_nc + 1) / (sum_x F_xc + N))` for each word.
    pub word_log_probs: [Vec<f64>; 2],
}

impl MnbModel {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let n = x.n_features;
        let mut counts = [vec![0.0; n], vec![0.0; n]];
        for (row, label) in x.rows().zip(&x.labels) {
            for (acc, v) in counts[label.index()].iter_mut().zip(row) {
                *acc += v;
            }
        }
        let word_log_probs = counts.map(|c| {
            let denom = ln(c.iter().sum::<f64>() + n as f64);
            c.iter().map(|f| ln(f + 1.0) - denom).collect()
        });
        MnbModel { log_priors: log_priors(x), word_log_probs }
    }

    /// `log P(c) + sum_n f_n log P(w_n | c)` per class.
    pub fn log_joint(&self, x: &[f64]) -> [f64; 2] {
        [0, 1].map(|c| self.log_priors[c] + crate::math::dot(x, &self.word_log_probs[c]))
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let j = self.log_joint(x);
        j[1] - j[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub log_priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    /// Smoothed variances, all strictly positive.
    pub variances: [Vec<f64>; 2],
}

impl GnbModel {
    /// Maximum-likelihood means and variances; every variance gets
    /// `var_smoothing * (largest per-feature variance of the whole set)`
    /// added (or `var_smoothing` itself when every feature is constant).
    pub fn fit(x: &FeatureMatrix, var_smoothing: f64) -> Self {
        let n = x.n_features;
        let moments = |rows: &mut dyn Iterator<Item = &[f64]>| {
            let mut count = 0.0;
            let mut sum = vec![0.0; n];
            let mut sq = vec![0.0; n];
            for r in rows {
                count += 1.0;
                for j in 0..n {
                    sum[j] += r[j];
                    sq[j] += r[j] * r[j];
                }
            }
            let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
            let var: Vec<f64> = sq.iter().zip(&mean).map(|(s, m)| (s / count - m * m).max(0.0)).collect();
            (mean, var)
        };
        let (_, all_var) = moments(&mut x.rows());
        let max_var = all_var.iter().cloned().fold(0.0, f64::max);
        let epsilon = if max_var > 0.0 { var_smoothing * max_var } else { var_smoothing };
        let per_class = Label::ALL.map(|l| {
            let (m, v) = moments(&mut x.rows().zip(&x.labels).filter(|(_, &y)| y == l).map(|(r, _)| r));
            (m, v.into_iter().map(|s| s + epsilon).collect::<Vec<_>>())
        });
        let [(m0, v0), (m1, v1)] = per_class;
        GnbModel { log_priors: log_priors(x), means: [m0, m1], variances: [v0, v1] }
    }

    pub fn log_joint(&self, x: &[f64]) -> [f64; 2] {
        const LN_2PI: f64 = 1.837_877_066_409_345_5;
        [0, 1].map(|c| {
            let mut s = self.log_priors[c];
            for ((xi, m), v) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                let d = xi - m;
                s -= 0.5 * (LN_2PI + ln(*v)) + d * d / (2.0 * v);
            }
            s
        })
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let j = self.log_joint(x);
        j[1] - j[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnbModel {
    pub log_priors: [f64; 2],
    /// Per class presence probability `(docs with word + 1) / (docs + 2)`.
    pub presence: [Vec<f64>; 2],
}

impl BnbModel {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let n = x.n_features;
        let mut docs = [0.0f64; 2];
        let mut present = [vec![0.0; n], vec![0.0; n]];
        for (row, label) in x.rows().zip(&x.labels) {
            let c = label.index();
            docs[c] += 1.0;
            for (acc, v) in present[c].iter_mut().zip(row) {
                if *v > 0.0 {
                    *acc += 1.0;
                }
            }
        }
        let presence = [0, 1].map(|c| present[c].iter().map(|k| (k + 1.0) / (docs[c] + 2.0)).collect());
        BnbModel { log_priors: log_priors(x), presence }
    }

    pub fn log_joint(&self, x: &[f64]) -> [f64; 2] {
        [0, 1].map(|c| {
            let mut s = self.log_priors[c];
            for (xi, p) in x.iter().zip(&self.presence[c]) {
                s += if *xi > 0.0 { ln(*p) } else { ln_1p(-*p) };
            }
            s
        })
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let j = self.log_joint(x);
        j[1] - j[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use Label::{Ham, Spam};

    fn matrix(rows: &[Vec<f64>], labels: &[Label]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows, labels, "t").unwrap()
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact posterior from the multinomial likelihood including the
    /// multinomial coefficient and the evidence term, computed with plain
    /// products from raw counts.
    fn mnb_oracle(rows: &[Vec<f64>], labels: &[Label], x: &[f64]) -> [f64; 2] {
        let n = x.len();
        let mut joint = [0.0; 2];
        for c in Label::ALL {
            let docs: Vec<&Vec<f64>> = rows.iter().zip(labels).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
            let prior = docs.len() as f64 / rows.len() as f64;
            let total: f64 = docs.iter().map(|r| r.iter().sum::<f64>()).sum();
            let mut lik = factorial(x.iter().sum::<f64>() as u32);
            for j in 0..n {
                let f_jc: f64 = docs.iter().map(|r| r[j]).sum();
                let p = (f_jc + 1.0) / (n as f64 + total);
                lik *= p.powi(x[j] as i32) / factorial(x[j] as u32);
            }
            joint[c.index()] = prior * lik;
        }
        let evidence = joint[0] + joint[1];
        [(joint[0] / evidence).ln(), (joint[1] / evidence).ln()]
    }

    fn bnb_oracle(rows: &[Vec<f64>], labels: &[Label], x: &[f64]) -> [f64; 2] {
        let mut joint = [0.0; 2];
        for c in Label::ALL {
            let docs: Vec<&Vec<f64>> = rows.iter().zip(labels).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
            let mut lik = docs.len() as f64 / rows.len() as f64;
            for j in 0..x.len() {
                let with = docs.iter().filter(|r| r[j] > 0.0).count() as f64;
                let p = (with + 1.0) / (docs.len() as f64 + 2.0);
                let xi = if x[j] > 0.0 { 1 } else { 0 };
                lik *= p.powi(xi) * (1.0 - p).powi(1 - xi);
            }
            joint[c.index()] = lik;
        }
        let evidence = joint[0] + joint[1];
        [(joint[0] / evidence).ln(), (joint[1] / evidence).ln()]
    }

    #[test]
    fn mnb_add_one_estimate() {
        // Columns: free, money, project, meeting.
        let rows = vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0]];
        let m = MnbModel::fit(&matrix(&rows, &[Spam, Ham]));
        assert!((m.word_log_probs[1][0].exp() - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.word_log_probs[1][2].exp() - 1.0 / 6.0).abs() < 1e-15);
        assert!((m.log_priors[0].exp() - 0.5).abs() < 1e-15);
        for c in 0..2 {
            let total: f64 = m.word_log_probs[c].iter().map(|l| l.exp()).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mnb_empty_document_uses_priors() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![0.0, 1.0]];
        let m = MnbModel::fit(&matrix(&rows, &[Spam, Ham, Ham]));
        let j = m.log_joint(&[0.0, 0.0]);
        assert_eq!(j, m.log_priors);
        assert!(m.score(&[0.0, 0.0]) < 0.0);
    }

    #[test]
    fn mnb_likelihood_is_linear_in_counts() {
        let rows = vec![vec![3.0, 1.0], vec![0.0, 2.0]];
        let m = MnbModel::fit(&matrix(&rows, &[Spam, Ham]));
        let x = [1.0, 2.0];
        let x2 = [2.0, 4.0];
        for c in 0..2 {
            let a = m.log_joint(&x)[c] - m.log_priors[c];
            let b = m.log_joint(&x2)[c] - m.log_priors[c];
            assert!((b - 2.0 * a).abs() < 1e-12);
        }
    }

    #[test]
    fn mnb_matches_exact_posterior_on_two_word_toy() {
        let rows = vec![vec![2.0, 0.0], vec![1.0, 1.0], vec![0.0, 3.0]];
        let labels = [Spam, Spam, Ham];
        let m = MnbModel::fit(&matrix(&rows, &labels));
        for x in [[0.0, 0.0], [1.0, 0.0], [2.0, 1.0], [0.0, 2.0], [3.0, 3.0]] {
            let ours = normalize_log(m.log_joint(&x));
            let exact = mnb_oracle(&rows, &labels, &x);
            assert!((ours[0] - exact[0]).abs() < 1e-10 && (ours[1] - exact[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn gnb_constant_feature_stays_finite() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 2.0], vec![0.0, 5.0], vec![0.0, 7.0]];
        let m = GnbModel::fit(&matrix(&rows, &[Spam, Spam, Ham, Ham]), 1e-9);
        assert!(m.variances.iter().flatten().all(|v| *v > 0.0));
        assert!(m.score(&[1.0, 1.0]).is_finite());
        let all_const = GnbModel::fit(&matrix(&[vec![1.0], vec![1.0]], &[Spam, Ham]), 1e-9);
        assert!(all_const.variances.iter().flatten().all(|v| *v > 0.0));
    }

    #[test]
    fn gnb_matches_hand_density() {
        // Spam values 1, 3 -> mean 2, var 1; ham values 6, 8, 10 -> mean 8, var 8/3.
        let rows: Vec<Vec<f64>> = [1.0, 3.0, 6.0, 8.0, 10.0].iter().map(|v| vec![*v]).collect();
        let labels = [Spam, Spam, Ham, Ham, Ham];
        let m = GnbModel::fit(&matrix(&rows, &labels), 1e-9);
        let eps = 1e-9 * 10.64; // overall variance of the five values
        let density = |x: f64, mu: f64, var: f64| (-(x - mu) * (x - mu) / (2.0 * var)).exp() / (2.0 * core::f64::consts::PI * var).sqrt();
        for x in [0.0, 2.0, 4.5, 9.0] {
            let spam = 0.4 * density(x, 2.0, 1.0 + eps);
            let ham = 0.6 * density(x, 8.0, 8.0 / 3.0 + eps);
            let post = normalize_log(m.log_joint(&[x]));
            assert!((post[1] - (spam / (spam + ham)).ln()).abs() < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn gnb_class_mean_wins_with_equal_variances() {
        let rows = vec![vec![0.0, 0.0], vec![2.0, 2.0], vec![4.0, 4.0], vec![6.0, 6.0]];
        let m = GnbModel::fit(&matrix(&rows, &[Ham, Ham, Spam, Spam]), 1e-9);
        assert!(m.score(&[5.0, 5.0]) > 0.0);
        assert!(m.score(&[1.0, 1.0]) < 0.0);
    }

    #[test]
    fn bnb_presence_estimate() {
        let mut rows = vec![vec![2.0, 0.0]; 10];
        rows.push(vec![0.0, 1.0]);
        let mut labels = vec![Spam; 10];
        labels.push(Ham);
        let m = BnbModel::fit(&matrix(&rows, &labels));
        assert!((m.presence[1][0] - 11.0 / 12.0).abs() < 1e-15);
        let s0 = m.log_joint(&[0.0, 0.0]);
        assert!(s0[0].is_finite() && s0[1].is_finite() && s0[0] != s0[1]);
    }

    #[test]
    fn bnb_matches_exhaustive_product() {
        let rows = vec![vec![1.0, 0.0, 3.0], vec![0.0, 2.0, 1.0], vec![0.0, 0.0, 1.0]];
        let labels = [Spam, Ham, Ham];
        let m = BnbModel::fit(&matrix(&rows, &labels));
        for mask in 0..8u32 {
            let x: Vec<f64> = (0..3).map(|j| f64::from((mask >> j) & 1)).collect();
            let ours = normalize_log(m.log_joint(&x));
            let exact = bnb_oracle(&rows, &labels, &x);
            assert!((ours[1] - exact[1]).abs() < 1e-10);
        }
    }

    fn small_corpus() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Label>)> {
        (2usize..=6, 1usize..=5).prop_flat_map(|(docs, words)| {
            (
                proptest::collection::vec(proptest::collection::vec(0u8..4, words), docs),
                proptest::collection::vec(any::<bool>(), docs),
            )
                .prop_filter_map("both classes", |(rows, spam)| {
                    let labels: Vec<Label> = spam.iter().map(|&s| if s { Spam } else { Ham }).collect();
                    (labels.contains(&Spam) && labels.contains(&Ham)).then(|| {
                        (rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect(), labels)
                    })
                })
        })
    }

    proptest! {
        #[test]
        fn mnb_and_bnb_match_exhaustive_oracles((rows, labels) in small_corpus(), probe in proptest::collection::vec(0u8..4, 5)) {
            let x: Vec<f64> = probe[..rows[0].len()].iter().map(|v| f64::from(*v)).collect();
            let mnb = MnbModel::fit(&matrix(&rows, &labels));
            let ours = normalize_log(mnb.log_joint(&x));
            let exact = mnb_oracle(&rows, &labels, &x);
            prop_assert!((ours[0] - exact[0]).abs() < 1e-10 && (ours[1] - exact[1]).abs() < 1e-10);
            let bnb = BnbModel::fit(&matrix(&rows, &labels));
            let ours = normalize_log(bnb.log_joint(&x));
            let exact = bnb_oracle(&rows, &labels, &x);
            prop_assert!((ours[0] - exact[0]).abs() < 1e-10 && (ours[1] - exact[1]).abs() < 1e-10);
        }

        #[test]
        fn scores_always_finite((rows, labels) in small_corpus(), probe in proptest::collection::vec(0.0f64..50.0, 5)) {
            let x = &probe[..rows[0].len()];
            let m = matrix(&rows, &labels);
            prop_assert!(MnbModel::fit(&m).score(x).is_finite());
            prop_assert!(GnbModel::fit(&m, 1e-9).score(x).is_finite());
            prop_assert!(BnbModel::fit(&m).score(x).is_finite());
        }

        #[test]
        fn bnb_depends_only_on_presence((rows, labels) in small_corpus(), probe in proptest::collection::vec(0u8..4, 5), scale in 1u8..5) {
            let x: Vec<f64> = probe[..rows[0].len()].iter().map(|v| f64::from(*v)).collect();
            let scaled: Vec<f64> = x.iter().map(|v| v * f64::from(scale) + if *v > 0.0 { 1.0 } else { 0.0 }).collect();
            let bnb = BnbModel::fit(&matrix(&rows, &labels));
            prop_assert_eq!(bnb.score(&x), bnb.score(&scaled));
        }
    }
}
