//! Labelled documents, class balancing and stratified partitioning.
//!
//! Reading a corpus from disk is done by the `spamlab` crate; this module
//! only holds the in-memory types and the deterministic partitioning logic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Class label. Spam is the positive class everywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Ham,
    Spam,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Ham, Label::Spam];

    pub fn is_spam(self) -> bool {
        self == Label::Spam
    }

    /// `+1` for spam, `-1` for ham.
    pub fn sign(self) -> f64 {
        match self {
            Label::Spam => 1.0,
            Label::Ham => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Ham => "ham",
            Label::Spam => "spam",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::Ham => 0,
            Label::Spam => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub label: Label,
    /// Email body, already decoded (invalid UTF-8 replaced by U+FFFD).
    pub raw_text: String,
    /// Name of the source folder, e.g. `enron3`.
    pub subset: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub ham: usize,
    pub spam: usize,
}

impl ClassCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Ham => self.ham,
            Label::Spam => self.spam,
        }
    }

    fn bump(&mut self, label: Label) {
        match label {
            Label::Ham => self.ham += 1,
            Label::Spam => self.spam += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.ham + self.spam
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<Document>,
    class_counts: ClassCounts,
    /// Files that could not be read while loading.
    #[serde(default)]
    pub skipped_files: usize,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut counts = ClassCounts::default();
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::MalformedCorpus(format!("duplicate document id {}", d.id)));
            }
            counts.bump(d.label);
        }
        Ok(Corpus { documents, class_counts: counts, skipped_files: 0 })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn class_counts(&self) -> ClassCounts {
        self.class_counts
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Map from id to position in `documents()`.
    pub fn index(&self) -> BTreeMap<&str, usize> {
        self.documents.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect()
    }

    fn positions_of(&self, label: Label) -> Vec<usize> {
        self.documents
            .iter()
            .enumerate()
            .filter(|(_, d)| d.label == label)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Downsamples the majority class to the size of the minority class.
///
/// The minority class is kept whole and document order is preserved. A
/// corpus that is already balanced comes back unchanged.
pub fn balance(corpus: &Corpus, seed: u64) -> Result<Corpus> {
    let counts = corpus.class_counts();
    if counts.ham == 0 {
        return Err(Error::BalanceImpossible("ham"));
    }
    if counts.spam == 0 {
        return Err(Error::BalanceImpossible("spam"));
    }
    if counts.ham == counts.spam {
        return Ok(corpus.clone());
    }
    let (majority, target) = if counts.ham > counts.spam {
        (Label::Ham, counts.spam)
    } else {
        (Label::Spam, counts.ham)
    };
    let mut pool = corpus.positions_of(majority);
    let mut rng = rng::stage_rng(seed, rng::STREAM_BALANCE);
    rng::shuffle(&mut rng, &mut pool);
    let kept: BTreeSet<usize> = pool.into_iter().take(target).collect();
    let documents = corpus
        .documents
        .iter()
        .enumerate()
        .filter(|(i, d)| d.label != majority || kept.contains(i))
        .map(|(_, d)| d.clone())
        .collect();
    let mut out = Corpus::new(documents)?;
    out.skipped_files = corpus.skipped_files;
    Ok(out)
}

/// Train/test partition plus stratified cross-validation folds over the
/// training ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub folds: Vec<Vec<String>>,
}

const ROUNDING_SLACK: f64 = 1e-9;

/// Number of training documents per class.
///
/// The overall training size is `floor(fraction * n)`. Each class first
/// gets `floor(fraction * n_c)`; that can fall one short of the overall
/// size, in which case the class with the larger fractional remainder
/// (ham on ties) takes the extra document.
fn train_quota(counts: ClassCounts, fraction: f64) -> [usize; 2] {
    let floor = |v: f64| crate::math::floor(v + ROUNDING_SLACK) as usize;
    let total = floor(fraction * counts.total() as f64);
    let exact = [fraction * counts.ham as f64, fraction * counts.spam as f64];
    let mut quota = [floor(exact[0]), floor(exact[1])];
    if quota[0] + quota[1] < total {
        let rem = [exact[0] - quota[0] as f64, exact[1] - quota[1] as f64];
        let c = if rem[1] > rem[0] { 1 } else { 0 };
        quota[c] += 1;
    }
    quota
}

/// Stratified train/test split followed by `k` stratified folds.
pub fn split(corpus: &Corpus, train_fraction: f64, k: usize, seed: u64) -> Result<SplitPlan> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if k < 2 {
        return Err(Error::InvalidParameter(format!("fold count must be at least 2, got {k}")));
    }
    let counts = corpus.class_counts();
    let quota = train_quota(counts, train_fraction);
    for label in Label::ALL {
        if quota[label.index()] < k {
            return Err(Error::Stratification(format!(
                "class {} has {} training documents, fewer than {k} folds",
                label.as_str(),
                quota[label.index()]
            )));
        }
    }

    let mut rng = rng::stage_rng(seed, rng::STREAM_SPLIT);
    let mut in_train = alloc::vec![false; corpus.len()];
    let mut fold_of = alloc::vec![usize::MAX; corpus.len()];
    let mut next_fold = 0usize;
    for label in Label::ALL {
        let mut pos = corpus.positions_of(label);
        rng::shuffle(&mut rng, &mut pos);
        for &p in pos.iter().take(quota[label.index()]) {
            in_train[p] = true;
            fold_of[p] = next_fold;
            next_fold = (next_fold + 1) % k;
        }
    }

    let mut plan = SplitPlan {
        seed,
        train_ids: Vec::new(),
        test_ids: Vec::new(),
        folds: alloc::vec![Vec::new(); k],
    };
    for (i, d) in corpus.documents().iter().enumerate() {
        if in_train[i] {
            plan.train_ids.push(d.id.clone());
            plan.folds[fold_of[i]].push(d.id.clone());
        } else {
            plan.test_ids.push(d.id.clone());
        }
    }
    Ok(plan)
}

impl SplitPlan {
    /// Checks the id-set algebra and per-fold stratification against
    /// `corpus`. Returns a description of the first violation.
    pub fn validate(&self, corpus: &Corpus) -> core::result::Result<(), String> {
        let all: BTreeSet<&str> = corpus.documents().iter().map(|d| d.id.as_str()).collect();
        let train: BTreeSet<&str> = self.train_ids.iter().map(String::as_str).collect();
        let test: BTreeSet<&str> = self.test_ids.iter().map(String::as_str).collect();
        if train.len() != self.train_ids.len() || test.len() != self.test_ids.len() {
            return Err("duplicate ids in plan".into());
        }
        if !train.is_disjoint(&test) {
            return Err("train and test overlap".into());
        }
        let union: BTreeSet<&str> = train.union(&test).copied().collect();
        if union != all {
            return Err("train and test do not cover the corpus".into());
        }
        let mut fold_union = BTreeSet::new();
        for f in &self.folds {
            for id in f {
                if !fold_union.insert(id.as_str()) {
                    return Err(format!("id {id} appears in two folds"));
                }
            }
        }
        if fold_union != train {
            return Err("folds do not cover the training ids".into());
        }
        let label_of: BTreeMap<&str, Label> =
            corpus.documents().iter().map(|d| (d.id.as_str(), d.label)).collect();
        let k = self.folds.len() as f64;
        let train_spam = self.train_ids.iter().filter(|id| label_of[id.as_str()].is_spam()).count();
        let train_ham = self.train_ids.len() - train_spam;
        for (i, f) in self.folds.iter().enumerate() {
            let spam = f.iter().filter(|id| label_of[id.as_str()].is_spam()).count() as f64;
            let ham = f.len() as f64 - spam;
            if crate::math::abs(spam - train_spam as f64 / k) > 1.0
                || crate::math::abs(ham - train_ham as f64 / k) > 1.0
            {
                return Err(format!("fold {i} is not stratified ({ham} ham, {spam} spam)"));
            }
        }
        Ok(())
    }
}
