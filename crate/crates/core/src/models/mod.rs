//! The classifier contract shared by all twelve models.
//!
//! A [`ClassifierSpec`] names a model kind with validated hyperparameters and
//! a seed; [`TrainedModel::fit`] turns it into an immutable model bound to
//! the dictionary fingerprint of its training matrix. Scores grow with
//! spam-likeness: margin models predict spam above 0, probability models
//! above 0.5.

pub mod gradient;
pub mod naive_bayes;
pub mod neighbors;
pub mod scaling;
pub mod svm;
pub mod trees;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::vectorize::FeatureMatrix;

use gradient::{LogRegModel, MlpModel, MlpOptions};
use naive_bayes::{BnbModel, GnbModel, MnbModel};
use neighbors::{KnnConfig, NeighborIndex};
use scaling::{MaxScaler, Standardizer};
use svm::{KernelKind, KernelSpec, SmoOptions, SvmModel};
use trees::{BoostModel, BoostParams, ForestModel, ForestParams};

/// Version of the serialized [`TrainedModel`] layout.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    MultinomialNb,
    GaussianNb,
    BernoulliNb,
    LinearSvm,
    PolySvm,
    SigmoidSvm,
    RbfSvm,
    Knn,
    Mpnn,
    LogisticRegression,
    RandomForest,
    Xgboost,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 12] = [
        ClassifierKind::MultinomialNb,
        ClassifierKind::GaussianNb,
        ClassifierKind::BernoulliNb,
        ClassifierKind::LinearSvm,
        ClassifierKind::PolySvm,
        ClassifierKind::SigmoidSvm,
        ClassifierKind::RbfSvm,
        ClassifierKind::Knn,
        ClassifierKind::Mpnn,
        ClassifierKind::LogisticRegression,
        ClassifierKind::RandomForest,
        ClassifierKind::Xgboost,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            ClassifierKind::MultinomialNb => "multinomial_nb",
            ClassifierKind::GaussianNb => "gaussian_nb",
            ClassifierKind::BernoulliNb => "bernoulli_nb",
            ClassifierKind::LinearSvm => "linear_svm",
            ClassifierKind::PolySvm => "poly_svm",
            ClassifierKind::SigmoidSvm => "sigmoid_svm",
            ClassifierKind::RbfSvm => "rbf_svm",
            ClassifierKind::Knn => "knn",
            ClassifierKind::Mpnn => "mpnn",
            ClassifierKind::LogisticRegression => "logistic_regression",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::Xgboost => "xgboost",
        }
    }

    /// Human-readable name used in plots.
    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::MultinomialNb => "Multinomial NB",
            ClassifierKind::GaussianNb => "Gaussian NB",
            ClassifierKind::BernoulliNb => "Bernoulli NB",
            ClassifierKind::LinearSvm => "Linear SVM",
            ClassifierKind::PolySvm => "Poly SVM",
            ClassifierKind::SigmoidSvm => "Sigmoid SVM",
            ClassifierKind::RbfSvm => "RBF SVM",
            ClassifierKind::Knn => "kNN",
            ClassifierKind::Mpnn => "MPNN",
            ClassifierKind::LogisticRegression => "Logistic regression",
            ClassifierKind::RandomForest => "Random forest",
            ClassifierKind::Xgboost => "XGBoost",
        }
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.slug() == s)
    }

    /// Whether scores are probabilities (threshold 0.5) rather than margins
    /// (threshold 0).
    pub fn is_probability(self) -> bool {
        matches!(
            self,
            ClassifierKind::Knn | ClassifierKind::Mpnn | ClassifierKind::LogisticRegression | ClassifierKind::RandomForest
        )
    }

    pub fn threshold(self) -> f64 {
        if self.is_probability() { 0.5 } else { 0.0 }
    }

    pub fn default_params(self) -> ModelParams {
        match self {
            ClassifierKind::MultinomialNb => ModelParams::MultinomialNb,
            ClassifierKind::GaussianNb => ModelParams::GaussianNb { var_smoothing: 1e-9 },
            ClassifierKind::BernoulliNb => ModelParams::BernoulliNb,
            ClassifierKind::LinearSvm | ClassifierKind::PolySvm | ClassifierKind::SigmoidSvm | ClassifierKind::RbfSvm => {
                ModelParams::Svm(SvmParams::default())
            }
            ClassifierKind::Knn => ModelParams::Knn(KnnConfig::default()),
            ClassifierKind::Mpnn => ModelParams::Mpnn(MlpParams::default()),
            ClassifierKind::LogisticRegression => ModelParams::LogisticRegression { l2_strength: 1.0, max_iter: 25 },
            ClassifierKind::RandomForest => ModelParams::RandomForest(ForestParams::default()),
            ClassifierKind::Xgboost => ModelParams::Xgboost(BoostParams::default()),
        }
    }
}

impl core::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.slug())
    }
}

/// Hyperparameters shared by the four kernel machines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    /// `None` trains to convergence.
    pub epoch_cap: Option<usize>,
    pub kkt_tol: f64,
    pub degree: u32,
    /// Sigmoid offset `r`.
    pub coef0: f64,
    /// RBF gamma; `None` means `1 / (N * variance of the scaled features)`.
    pub gamma: Option<f64>,
    /// Divide each feature by its training maximum before training.
    pub scale_features: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, epoch_cap: Some(5), kkt_tol: 1e-3, degree: 3, coef0: 0.0, gamma: None, scale_features: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub max_iter: usize,
    pub l2: f64,
    pub grad_tol: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams { hidden: vec![50], max_iter: 10_000, l2: 1e-4, grad_tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelParams {
    MultinomialNb,
    GaussianNb { var_smoothing: f64 },
    BernoulliNb,
    Svm(SvmParams),
    Knn(KnnConfig),
    Mpnn(MlpParams),
    LogisticRegression { l2_strength: f64, max_iter: usize },
    RandomForest(ForestParams),
    Xgboost(BoostParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub params: ModelParams,
    /// Governs every random choice made while fitting.
    pub seed: u64,
}

impl ClassifierSpec {
    /// The kind with its default hyperparameters.
    pub fn new(kind: ClassifierKind, seed: u64) -> Self {
        ClassifierSpec { kind, params: kind.default_params(), seed }
    }

    pub fn with_params(kind: ClassifierKind, params: ModelParams, seed: u64) -> Result<Self> {
        let spec = ClassifierSpec { kind, params, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mismatch = || Error::InvalidParameter(format!("hyperparameters do not belong to {}", self.kind));
        match (&self.params, self.kind) {
            (ModelParams::MultinomialNb, ClassifierKind::MultinomialNb) | (ModelParams::BernoulliNb, ClassifierKind::BernoulliNb) => Ok(()),
            (ModelParams::GaussianNb { var_smoothing }, ClassifierKind::GaussianNb) => {
                if *var_smoothing > 0.0 && var_smoothing.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("var_smoothing must be positive".into()))
                }
            }
            (ModelParams::Svm(p), ClassifierKind::LinearSvm | ClassifierKind::PolySvm | ClassifierKind::SigmoidSvm | ClassifierKind::RbfSvm) => {
                if !(p.c > 0.0) || !(p.kkt_tol >= 0.0) {
                    return Err(Error::InvalidParameter("SVM needs c > 0 and kkt_tol >= 0".into()));
                }
                if p.epoch_cap == Some(0) {
                    return Err(Error::InvalidParameter("epoch_cap must be >= 1".into()));
                }
                self.kernel(p, 1.0).validate()
            }
            (ModelParams::Knn(cfg), ClassifierKind::Knn) => cfg.validate(),
            (ModelParams::Mpnn(p), ClassifierKind::Mpnn) => {
                if p.hidden.contains(&0) || !(p.l2 >= 0.0) || p.max_iter == 0 {
                    Err(Error::InvalidParameter("MPNN needs nonzero layer widths, l2 >= 0 and max_iter >= 1".into()))
                } else {
                    Ok(())
                }
            }
            (ModelParams::LogisticRegression { l2_strength, max_iter }, ClassifierKind::LogisticRegression) => {
                if *l2_strength >= 0.0 && *max_iter >= 1 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("logistic regression needs l2_strength >= 0 and max_iter >= 1".into()))
                }
            }
            (ModelParams::RandomForest(p), ClassifierKind::RandomForest) => p.validate(),
            (ModelParams::Xgboost(p), ClassifierKind::Xgboost) => p.validate(),
            _ => Err(mismatch()),
        }
    }

    fn kernel(&self, p: &SvmParams, default_gamma: f64) -> KernelSpec {
        let kind = match self.kind {
            ClassifierKind::PolySvm => KernelKind::Poly,
            ClassifierKind::SigmoidSvm => KernelKind::Sigmoid,
            ClassifierKind::RbfSvm => KernelKind::Rbf,
            _ => KernelKind::Linear,
        };
        KernelSpec { kind, degree: p.degree, coef0: p.coef0, gamma: p.gamma.unwrap_or(default_gamma) }
    }
}

/// Learned state of each model family, together with any input scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedParams {
    MultinomialNb(MnbModel),
    GaussianNb(GnbModel),
    BernoulliNb(BnbModel),
    Svm { scaler: Option<MaxScaler>, model: SvmModel },
    Knn { k: usize, index: NeighborIndex },
    Mpnn { scaler: Standardizer, model: MlpModel },
    LogisticRegression { scaler: Standardizer, model: LogRegModel },
    RandomForest(ForestModel),
    Xgboost(BoostModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ClassifierSpec,
    /// Fingerprint of the dictionary the training columns came from.
    pub fingerprint: String,
    pub n_features: usize,
    pub params: FittedParams,
}

fn spam_targets(x: &FeatureMatrix) -> Vec<f64> {
    x.labels.iter().map(|l| if l.is_spam() { 1.0 } else { 0.0 }).collect()
}

fn apply_standardizer(s: &Standardizer, row: &[f64]) -> Vec<f64> {
    row.iter().zip(s.means.iter().zip(&s.scales)).map(|(v, (m, sc))| (v - m) / sc).collect()
}

impl TrainedModel {
    pub fn fit(spec: &ClassifierSpec, x: &FeatureMatrix) -> Result<Self> {
        spec.validate()?;
        if x.is_empty() {
            return Err(Error::DegenerateTraining("empty training matrix".into()));
        }
        if x.class_count(Label::Spam) == 0 || x.class_count(Label::Ham) == 0 {
            return Err(Error::DegenerateTraining("training data holds a single class".into()));
        }
        let dim = x.n_features;
        let spam: Vec<bool> = x.labels.iter().map(|l| l.is_spam()).collect();
        let params = match &spec.params {
            ModelParams::MultinomialNb => FittedParams::MultinomialNb(MnbModel::fit(x)),
            ModelParams::GaussianNb { var_smoothing } => FittedParams::GaussianNb(GnbModel::fit(x, *var_smoothing)),
            ModelParams::BernoulliNb => FittedParams::BernoulliNb(BnbModel::fit(x)),
            ModelParams::Svm(p) => {
                let scaler = p.scale_features.then(|| MaxScaler::fit(x));
                let rows = match &scaler {
                    Some(s) => s.transform(&x.data),
                    None => x.data.clone(),
                };
                let kernel = spec.kernel(p, default_rbf_gamma(&rows, dim));
                let y: Vec<f64> = x.labels.iter().map(|l| l.sign()).collect();
                let opts = SmoOptions { c: p.c, epoch_cap: p.epoch_cap, kkt_tol: p.kkt_tol, ..Default::default() };
                FittedParams::Svm { scaler, model: SvmModel::fit(&rows, dim, &y, kernel, &opts)? }
            }
            ModelParams::Knn(cfg) => {
                if cfg.k > x.n_rows() {
                    return Err(Error::InvalidParameter(format!("k = {} exceeds the {} training rows", cfg.k, x.n_rows())));
                }
                FittedParams::Knn { k: cfg.k, index: NeighborIndex::build(x.data.clone(), dim, spam, cfg)? }
            }
            ModelParams::Mpnn(p) => {
                let scaler = Standardizer::fit(x);
                let opts = MlpOptions { max_iter: p.max_iter, l2: p.l2, grad_tol: p.grad_tol, seed: spec.seed };
                let model = MlpModel::fit(&scaler.transform(&x.data), dim, &spam_targets(x), &p.hidden, &opts)?;
                FittedParams::Mpnn { scaler, model }
            }
            ModelParams::LogisticRegression { l2_strength, max_iter } => {
                let scaler = Standardizer::fit(x);
                let model = LogRegModel::fit(&scaler.transform(&x.data), dim, &spam_targets(x), *l2_strength, *max_iter)?;
                FittedParams::LogisticRegression { scaler, model }
            }
            ModelParams::RandomForest(p) => FittedParams::RandomForest(ForestModel::fit(&x.data, dim, &spam, p, spec.seed)?),
            ModelParams::Xgboost(p) => FittedParams::Xgboost(BoostModel::fit(&x.data, dim, &spam, p)?),
        };
        Ok(TrainedModel {
            format_version: MODEL_FORMAT_VERSION,
            spec: spec.clone(),
            fingerprint: x.fingerprint.clone(),
            n_features: dim,
            params,
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        self.spec.kind
    }

    fn check_columns(&self, x: &FeatureMatrix) -> Result<()> {
        if x.fingerprint != self.fingerprint {
            return Err(Error::IncompatibleFeatures { expected: self.fingerprint.clone(), found: x.fingerprint.clone() });
        }
        if x.n_features != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, found: x.n_features });
        }
        Ok(())
    }

    /// Spam-direction score of one raw count row. The row length is not
    /// checked against the training dictionary.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        match &self.params {
            FittedParams::MultinomialNb(m) => m.score(row),
            FittedParams::GaussianNb(m) => m.score(row),
            FittedParams::BernoulliNb(m) => m.score(row),
            FittedParams::Svm { scaler, model } => match scaler {
                Some(s) => {
                    let mut scaled = Vec::with_capacity(row.len());
                    s.transform_row(row, &mut scaled);
                    model.decision(&scaled)
                }
                None => model.decision(row),
            },
            FittedParams::Knn { k, index } => index.spam_score(row, *k).unwrap_or(f64::NAN),
            FittedParams::Mpnn { scaler, model } => model.proba(&apply_standardizer(scaler, row)),
            FittedParams::LogisticRegression { scaler, model } => model.proba(&apply_standardizer(scaler, row)),
            FittedParams::RandomForest(m) => m.spam_fraction(row),
            FittedParams::Xgboost(m) => m.margin(row),
        }
    }

    pub fn decision_scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_columns(x)?;
        Ok(x.rows().map(|r| self.score_row(r)).collect())
    }

    /// Spam exactly when the score exceeds the kind's threshold.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<Label>> {
        let t = self.kind().threshold();
        Ok(self.decision_scores(x)?.into_iter().map(|s| if s > t { Label::Spam } else { Label::Ham }).collect())
    }
}

/// `1 / (N * variance of all entries)`, or 1 when the entries are constant.
pub fn default_rbf_gamma(rows: &[f64], dim: usize) -> f64 {
    let n = rows.len() as f64;
    if rows.is_empty() || dim == 0 {
        return 1.0;
    }
    let mean = rows.iter().sum::<f64>() / n;
    let var = rows.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 { 1.0 / (dim as f64 * var) } else { 1.0 }
}
