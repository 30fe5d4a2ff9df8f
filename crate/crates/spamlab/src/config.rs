//! Run configuration: JSON file, command-line overrides and validation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spamlab_core::models::{ClassifierKind, ClassifierSpec, ModelParams};
use spamlab_core::textprep::PrepFlags;

use crate::error::{AppError, AppResult};

/// Environment variable consulted when no corpus root is configured.
pub const CORPUS_ENV: &str = "ENRON_CORPUS_DIR";

pub const DEFAULT_FEATURE_SIZES: [usize; 8] = [10, 25, 50, 75, 100, 125, 150, 200];

/// One configured classifier. `params`, when given, replaces the defaults
/// for that classifier; fields left out of the JSON object keep their
/// default values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub kind: ClassifierKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
}

impl ModelEntry {
    /// Unvalidated; [`RunConfig::validate`] checks every entry.
    pub fn spec(&self, seed: u64) -> ClassifierSpec {
        match &self.params {
            Some(p) => ClassifierSpec { kind: self.kind, params: p.clone(), seed },
            None => ClassifierSpec::new(self.kind, seed),
        }
    }
}

impl From<ClassifierKind> for ModelEntry {
    fn from(kind: ClassifierKind) -> Self {
        ModelEntry { kind, params: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub models: Vec<ClassifierKind>,
    /// Test documents explained per model.
    pub instances: usize,
    pub background: usize,
    /// Feature orderings per instance for sampled Shapley values.
    pub permutations: usize,
    pub top_k: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            models: vec![ClassifierKind::RandomForest, ClassifierKind::Xgboost, ClassifierKind::Mpnn],
            instances: 20,
            background: 100,
            permutations: 10,
            top_k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Falls back to `$ENRON_CORPUS_DIR` when absent.
    pub corpus_root: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub dict_size: usize,
    pub prep: PrepFlags,
    /// Flags of the "off" arm in the preprocessing ablation.
    pub ablation_prep: PrepFlags,
    pub models: Vec<ModelEntry>,
    pub train_fraction: f64,
    pub folds: usize,
    /// Random splits in `compare`.
    pub repeats: usize,
    pub feature_sizes: Vec<usize>,
    pub explain: ExplainConfig,
    /// Worker threads; all cores when absent.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_root: None,
            output_dir: PathBuf::from("spamlab-out"),
            seed: 42,
            dict_size: spamlab_core::vectorize::DEFAULT_DICT_SIZE,
            prep: PrepFlags::default(),
            ablation_prep: PrepFlags::all_off(),
            models: ClassifierKind::ALL.iter().copied().map(ModelEntry::from).collect(),
            train_fraction: 0.7,
            folds: 5,
            repeats: 20,
            feature_sizes: DEFAULT_FEATURE_SIZES.to_vec(),
            explain: ExplainConfig::default(),
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> AppResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
    }

    /// Fills `corpus_root` from the environment when unset.
    pub fn resolve_corpus_root(&mut self) {
        if self.corpus_root.is_none() {
            self.corpus_root = std::env::var_os(CORPUS_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        }
    }

    pub fn corpus_root(&self) -> AppResult<&Path> {
        self.corpus_root
            .as_deref()
            .ok_or_else(|| AppError::Config(format!("no corpus root given and {CORPUS_ENV} is not set")))
    }

    pub fn specs(&self) -> Vec<ClassifierSpec> {
        self.models.iter().map(|m| m.spec(self.seed)).collect()
    }

    /// Checks every field against the preconditions of the stages that use
    /// it. Runs before any output is written.
    pub fn validate(&self) -> AppResult<()> {
        let bad = |msg: String| Err(AppError::Config(msg));
        let root = self.corpus_root()?;
        if !root.is_dir() {
            return bad(format!("corpus root {} is not a directory", root.display()));
        }
        if self.dict_size == 0 {
            return bad("dict_size must be >= 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if self.folds < 2 {
            return bad(format!("folds must be >= 2, got {}", self.folds));
        }
        if self.repeats < 2 {
            return bad(format!("repeats must be >= 2, got {}", self.repeats));
        }
        if self.models.is_empty() {
            return bad("at least one model must be configured".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            if !seen.insert(m.kind) {
                return bad(format!("model {} is listed twice", m.kind.slug()));
            }
            m.spec(self.seed).validate().map_err(|e| AppError::Config(format!("{}: {e}", m.kind.slug())))?;
        }
        if self.feature_sizes.is_empty() || self.feature_sizes.contains(&0) {
            return bad("feature_sizes must be a non-empty list of positive sizes".into());
        }
        let e = &self.explain;
        if e.instances == 0 || e.background == 0 || e.permutations == 0 || e.top_k == 0 {
            return bad("explain instances, background, permutations and top_k must be >= 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses a comma-separated list of model slugs.
pub fn parse_model_list(list: &str) -> AppResult<Vec<ClassifierKind>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| ClassifierKind::from_slug(s).ok_or_else(|| AppError::Config(format!("unknown model {s:?}"))))
        .collect()
}
