//! Confusion metrics, ROC analysis and stratified cross-validation.
//!
//! Spam is the positive class. Metrics whose denominator is zero are
//! reported as `None` instead of being coerced to 0.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, SplitPlan};
use crate::error::{Error, Result};
use crate::math::{mean, sample_std};
use crate::models::{ClassifierSpec, TrainedModel};
use crate::textprep::TokenStream;
use crate::vectorize::{build_dictionary_iter, Dictionary, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

pub fn confusion(truth: &[Label], predicted: &[Label]) -> Result<Confusion> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: predicted.len() });
    }
    let mut c = Confusion::default();
    for (t, p) in truth.iter().zip(predicted) {
        match (t.is_spam(), p.is_spam()) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `TP / (TP + FP)`.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `TP / (TP + FN)`.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2TP / (2TP + FP + FN)`, computed from the counts directly.
    pub fn fscore(&self) -> Option<f64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    /// The same table with ham as the positive class.
    pub fn ham_positive(&self) -> Confusion {
        Confusion { tp: self.tn, fp: self.fn_, tn: self.tp, fn_: self.fp }
    }

    fn macro_of(&self, f: impl Fn(&Confusion) -> Option<f64>) -> Option<f64> {
        Some((f(self)? + f(&self.ham_positive())?) / 2.0)
    }

    /// Unweighted mean of the spam- and ham-positive precision.
    pub fn macro_precision(&self) -> Option<f64> {
        self.macro_of(Confusion::precision)
    }

    pub fn macro_recall(&self) -> Option<f64> {
        self.macro_of(Confusion::recall)
    }

    pub fn macro_fscore(&self) -> Option<f64> {
        self.macro_of(Confusion::fscore)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Sweeps thresholds from the highest score down; tied scores move together.
pub fn roc_curve(scores: &[f64], labels: &[Label]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), found: scores.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("ROC scores must be finite".into()));
    }
    let pos = labels.iter().filter(|l| l.is_spam()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("ROC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = alloc::vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]].is_spam() { tp += 1 } else { fp += 1 }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
    Ok(RocCurve { points, auc })
}

impl RocCurve {
    /// TPR at `fpr`, taking the top of any vertical segment.
    pub fn tpr_at(&self, fpr: f64) -> f64 {
        let after = self.points.partition_point(|p| p.0 <= fpr);
        if after == 0 {
            return 0.0;
        }
        let (x0, y0) = self.points[after - 1];
        match self.points.get(after) {
            Some(&(x1, y1)) if x1 > x0 => y0 + (y1 - y0) * (fpr - x0) / (x1 - x0),
            _ => y0,
        }
    }
}

pub const MEAN_ROC_GRID: usize = 101;

/// Fold-averaged ROC on a fixed FPR grid with a one-standard-deviation band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRoc {
    pub fpr: Vec<f64>,
    pub tpr_mean: Vec<f64>,
    pub tpr_std: Vec<f64>,
    pub auc_mean: f64,
    pub auc_std: f64,
}

impl MeanRoc {
    pub fn from_curves(curves: &[RocCurve]) -> Option<Self> {
        if curves.is_empty() {
            return None;
        }
        let fpr: Vec<f64> = (0..MEAN_ROC_GRID).map(|i| i as f64 / (MEAN_ROC_GRID - 1) as f64).collect();
        let mut tpr_mean = Vec::with_capacity(MEAN_ROC_GRID);
        let mut tpr_std = Vec::with_capacity(MEAN_ROC_GRID);
        for &x in &fpr {
            let ys: Vec<f64> = curves.iter().map(|c| c.tpr_at(x)).collect();
            tpr_mean.push(mean(&ys)?);
            tpr_std.push(sample_std(&ys).unwrap_or(0.0));
        }
        let aucs: Vec<f64> = curves.iter().map(|c| c.auc).collect();
        Some(MeanRoc { fpr, tpr_mean, tpr_std, auc_mean: mean(&aucs)?, auc_std: sample_std(&aucs).unwrap_or(0.0) })
    }
}

/// Measures how long a prediction pass takes. The core crate has no clock,
/// so callers supply one.
pub trait PredictionTimer {
    /// Seconds taken by `work`, or `None` when no clock is available.
    fn time(&self, work: &mut dyn FnMut()) -> Option<f64>;
}

/// A timer that never measures.
pub struct NoTimer;

impl PredictionTimer for NoTimer {
    fn time(&self, _work: &mut dyn FnMut()) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    /// Fold index as text, or `holdout`.
    pub fold: String,
    pub n_eval: usize,
    pub confusion: Confusion,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fscore: Option<f64>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_fscore: Option<f64>,
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
    pub predict_seconds: Option<f64>,
}

impl FoldMetrics {
    pub fn from_predictions(fold: String, truth: &[Label], predicted: &[Label], scores: &[f64]) -> Result<Self> {
        let c = confusion(truth, predicted)?;
        Ok(FoldMetrics {
            fold,
            n_eval: truth.len(),
            confusion: c,
            precision: c.precision(),
            recall: c.recall(),
            fscore: c.fscore(),
            macro_precision: c.macro_precision(),
            macro_recall: c.macro_recall(),
            macro_fscore: c.macro_fscore(),
            accuracy: c.accuracy(),
            auc: roc_curve(scores, truth).ok().map(|r| r.auc),
            predict_seconds: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Precision,
    Recall,
    Fscore,
    MacroPrecision,
    MacroRecall,
    MacroFscore,
    Accuracy,
    Auc,
    PredictSeconds,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Precision,
        Metric::Recall,
        Metric::Fscore,
        Metric::MacroPrecision,
        Metric::MacroRecall,
        Metric::MacroFscore,
        Metric::Accuracy,
        Metric::Auc,
        Metric::PredictSeconds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::Fscore => "fscore",
            Metric::MacroPrecision => "macro_precision",
            Metric::MacroRecall => "macro_recall",
            Metric::MacroFscore => "macro_fscore",
            Metric::Accuracy => "accuracy",
            Metric::Auc => "auc",
            Metric::PredictSeconds => "predict_seconds",
        }
    }

    pub fn of(self, m: &FoldMetrics) -> Option<f64> {
        match self {
            Metric::Precision => m.precision,
            Metric::Recall => m.recall,
            Metric::Fscore => m.fscore,
            Metric::MacroPrecision => m.macro_precision,
            Metric::MacroRecall => m.macro_recall,
            Metric::MacroFscore => m.macro_fscore,
            Metric::Accuracy => m.accuracy,
            Metric::Auc => m.auc,
            Metric::PredictSeconds => m.predict_seconds,
        }
    }
}

/// Mean and sample standard deviation over the folds where a metric is
/// defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Folds contributing a value.
    pub defined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub model: String,
    pub folds: Vec<FoldMetrics>,
    pub summary: BTreeMap<Metric, MetricSummary>,
}

impl FoldReport {
    pub fn new(model: String, folds: Vec<FoldMetrics>) -> Self {
        let summary = Metric::ALL
            .into_iter()
            .map(|m| {
                let vals: Vec<f64> = folds.iter().filter_map(|f| m.of(f)).collect();
                (m, MetricSummary { mean: mean(&vals), std: sample_std(&vals), defined: vals.len() })
            })
            .collect();
        FoldReport { model, folds, summary }
    }

    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.summary.get(&metric).and_then(|s| s.mean)
    }

    pub fn std(&self, metric: Metric) -> Option<f64> {
        self.summary.get(&metric).and_then(|s| s.std)
    }
}

/// Prepared documents addressable by id.
#[derive(Debug, Clone)]
pub struct LabeledStreams {
    streams: Vec<TokenStream>,
    labels: Vec<Label>,
    position: BTreeMap<String, usize>,
}

impl LabeledStreams {
    pub fn new(streams: Vec<TokenStream>, labels: Vec<Label>) -> Result<Self> {
        if streams.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: streams.len(), found: labels.len() });
        }
        let mut position = BTreeMap::new();
        for (i, s) in streams.iter().enumerate() {
            if position.insert(s.doc_id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate document id {}", s.doc_id)));
            }
        }
        Ok(LabeledStreams { streams, labels, position })
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    pub fn streams(&self) -> &[TokenStream] {
        &self.streams
    }

    fn lookup(&self, id: &str) -> Result<usize> {
        self.position.get(id).copied().ok_or_else(|| Error::InvalidInput(format!("unknown document id {id}")))
    }

    pub fn label(&self, id: &str) -> Result<Label> {
        Ok(self.labels[self.lookup(id)?])
    }

    /// Count matrix of `ids`, in that order, over `dict`.
    pub fn matrix(&self, ids: &[String], dict: &Dictionary) -> Result<FeatureMatrix> {
        let pos: Vec<usize> = ids.iter().map(|id| self.lookup(id)).collect::<Result<_>>()?;
        let streams: Vec<&TokenStream> = pos.iter().map(|&p| &self.streams[p]).collect();
        let labels: Vec<Label> = pos.iter().map(|&p| self.labels[p]).collect();
        FeatureMatrix::from_streams(&streams, &labels, dict)
    }

    /// Dictionary built from `train_ids` only.
    pub fn dictionary(&self, train_ids: &[String], size: usize) -> Result<Dictionary> {
        let pos: Vec<usize> = train_ids.iter().map(|id| self.lookup(id)).collect::<Result<_>>()?;
        build_dictionary_iter(pos.iter().map(|&p| &self.streams[p]), size)
    }
}

/// Matrices for one train/evaluate round; the dictionary never sees the
/// evaluation documents.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub dictionary: Dictionary,
    pub train: FeatureMatrix,
    pub eval: FeatureMatrix,
}

pub fn fold_data(data: &LabeledStreams, train_ids: &[String], eval_ids: &[String], dict_size: usize) -> Result<FoldData> {
    let train_set: BTreeSet<&str> = train_ids.iter().map(String::as_str).collect();
    if let Some(id) = eval_ids.iter().find(|id| train_set.contains(id.as_str())) {
        return Err(Error::InvalidInput(format!("document {id} is in both training and evaluation sets")));
    }
    let dictionary = data.dictionary(train_ids, dict_size)?;
    Ok(FoldData { train: data.matrix(train_ids, &dictionary)?, eval: data.matrix(eval_ids, &dictionary)?, dictionary })
}

/// Training ids of CV round `fold`: every other fold, in plan order.
pub fn fold_train_ids(plan: &SplitPlan, fold: usize) -> Vec<String> {
    plan.folds.iter().enumerate().filter(|(i, _)| *i != fold).flat_map(|(_, f)| f.iter().cloned()).collect()
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub metrics: FoldMetrics,
    pub roc: Option<RocCurve>,
    pub model: TrainedModel,
    pub dictionary: Dictionary,
    pub eval_ids: Vec<String>,
    pub scores: Vec<f64>,
}

/// Fits on `train_ids`, scores `eval_ids` and times the prediction pass.
pub fn evaluate_split(
    spec: &ClassifierSpec,
    data: &LabeledStreams,
    train_ids: &[String],
    eval_ids: &[String],
    dict_size: usize,
    fold: String,
    timer: &dyn PredictionTimer,
) -> Result<FoldOutcome> {
    let fd = fold_data(data, train_ids, eval_ids, dict_size)?;
    let model = TrainedModel::fit(spec, &fd.train)?;
    let scores = model.decision_scores(&fd.eval)?;
    let predicted = model.predict(&fd.eval)?;
    let mut metrics = FoldMetrics::from_predictions(fold, &fd.eval.labels, &predicted, &scores)?;
    metrics.predict_seconds = timer.time(&mut || {
        let _ = model.predict(&fd.eval);
    });
    let roc = roc_curve(&scores, &fd.eval.labels).ok();
    Ok(FoldOutcome { metrics, roc, model, dictionary: fd.dictionary, eval_ids: eval_ids.to_vec(), scores })
}

/// Fits on all folds but one, for each fold in turn.
pub fn cross_validate(
    spec: &ClassifierSpec,
    plan: &SplitPlan,
    data: &LabeledStreams,
    dict_size: usize,
    timer: &dyn PredictionTimer,
) -> Result<(FoldReport, Vec<FoldOutcome>)> {
    let outcomes = (0..plan.folds.len())
        .map(|k| evaluate_split(spec, data, &fold_train_ids(plan, k), &plan.folds[k], dict_size, format!("{k}"), timer))
        .collect::<Result<Vec<_>>>()?;
    let report = FoldReport::new(spec.kind.slug().into(), outcomes.iter().map(|o| o.metrics.clone()).collect());
    Ok((report, outcomes))
}
