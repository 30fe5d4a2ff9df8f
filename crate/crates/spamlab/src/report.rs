//! Output files: CSV tables, their readers for re-plotting, and the
//! hashed artifact manifest written into `report.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spamlab_core::eval::{FoldMetrics, FoldReport, MeanRoc, Metric};
use spamlab_core::explain::{AttributionSet, RankedFeature};
use spamlab_core::stats::SignificanceMatrix;

use crate::config::hex;
use crate::error::{AppError, AppResult};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const FAILED_FILE: &str = "FAILED";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Output directory that remembers every file written through it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: BTreeMap<String, PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> AppResult<Self> {
        fs::create_dir_all(root).map_err(|e| AppError::io(root, e))?;
        let failed = root.join(FAILED_FILE);
        if failed.exists() {
            fs::remove_file(&failed).map_err(|e| AppError::io(&failed, e))?;
        }
        Ok(OutputDir { root: root.to_path_buf(), written: BTreeMap::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` to `rel` (forward slashes) under the root.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> AppResult<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| AppError::io(&path, e))?;
        self.written.insert(rel.to_string(), path);
        Ok(())
    }

    /// Hash and size of every file written so far, sorted by path.
    pub fn manifest(&self) -> AppResult<Vec<ArtifactEntry>> {
        self.written
            .iter()
            .filter(|(rel, _)| rel.as_str() != REPORT_FILE)
            .map(|(rel, path)| {
                let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
                Ok(ArtifactEntry { path: rel.clone(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
            })
            .collect()
    }

    /// Marks the directory as the output of a failed run.
    pub fn mark_failed(&mut self, stages: &[String]) -> AppResult<()> {
        let mut text = String::new();
        for s in stages {
            text.push_str(s);
            text.push('\n');
        }
        self.write(FAILED_FILE, text.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> AppResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| AppError::Config(format!("csv buffer: {e}")))
}

const METRIC_COLUMNS: [Metric; 8] = [
    Metric::Precision,
    Metric::Recall,
    Metric::Fscore,
    Metric::MacroPrecision,
    Metric::MacroRecall,
    Metric::MacroFscore,
    Metric::Accuracy,
    Metric::Auc,
];

fn metrics_header() -> Vec<&'static str> {
    let mut h = vec!["model", "fold", "n_eval", "tp", "fp", "tn", "fn"];
    h.extend(METRIC_COLUMNS.iter().map(|m| m.name()));
    h
}

fn fold_row(model: &str, m: &FoldMetrics) -> Vec<String> {
    let c = m.confusion;
    let mut row = vec![
        model.to_string(),
        m.fold.clone(),
        m.n_eval.to_string(),
        c.tp.to_string(),
        c.fp.to_string(),
        c.tn.to_string(),
        c.fn_.to_string(),
    ];
    row.extend(METRIC_COLUMNS.iter().map(|metric| opt(metric.of(m))));
    row
}

/// Per-model rows: one per CV fold, the holdout evaluation, then the
/// cross-validation mean and standard deviation. Timings are left out so
/// that identical runs give identical files.
pub fn metrics_csv(models: &[(FoldReport, Option<FoldMetrics>)]) -> AppResult<Vec<u8>> {
    let mut rows = Vec::new();
    for (report, holdout) in models {
        rows.extend(report.folds.iter().map(|f| fold_row(&report.model, f)));
        if let Some(h) = holdout {
            rows.push(fold_row(&report.model, h));
        }
        for (label, pick) in [("mean", 0), ("std", 1)] {
            let mut row = vec![report.model.clone(), label.into(), String::new(), String::new(), String::new(), String::new(), String::new()];
            row.extend(METRIC_COLUMNS.iter().map(|&m| {
                let s = report.summary.get(&m);
                opt(s.and_then(|s| if pick == 0 { s.mean } else { s.std }))
            }));
            rows.push(row);
        }
    }
    csv_bytes(&metrics_header(), rows)
}

pub fn significance_csv(matrix: &SignificanceMatrix) -> AppResult<Vec<u8>> {
    let rows = matrix.pairs.iter().map(|p| {
        vec![
            p.model_a.clone(),
            p.model_b.clone(),
            p.t_statistic.to_string(),
            p.degrees_of_freedom.to_string(),
            p.p_two_sided.to_string(),
            p.p_adjusted.to_string(),
            p.significant.to_string(),
        ]
    });
    csv_bytes(&["model_a", "model_b", "t_statistic", "df", "p_value", "p_adjusted", "significant"], rows)
}

pub fn roc_csv(roc: &MeanRoc) -> AppResult<Vec<u8>> {
    let rows = (0..roc.fpr.len()).map(|i| {
        vec![
            roc.fpr[i].to_string(),
            roc.tpr_mean[i].to_string(),
            roc.tpr_std[i].to_string(),
            roc.auc_mean.to_string(),
            roc.auc_std.to_string(),
        ]
    });
    csv_bytes(&["fpr", "tpr_mean", "tpr_std", "auc_mean", "auc_std"], rows)
}

pub fn read_roc_csv(path: &Path) -> AppResult<MeanRoc> {
    let mut r = csv::Reader::from_path(path)?;
    let mut roc = MeanRoc { fpr: vec![], tpr_mean: vec![], tpr_std: vec![], auc_mean: 0.0, auc_std: 0.0 };
    for rec in r.deserialize::<(f64, f64, f64, f64, f64)>() {
        let (f, m, s, am, asd) = rec?;
        roc.fpr.push(f);
        roc.tpr_mean.push(m);
        roc.tpr_std.push(s);
        roc.auc_mean = am;
        roc.auc_std = asd;
    }
    if roc.fpr.is_empty() {
        return Err(AppError::Config(format!("{} has no rows", path.display())));
    }
    Ok(roc)
}

/// One row per (instance, feature).
pub fn shap_csv(sets: &[AttributionSet], names: &[String]) -> AppResult<Vec<u8>> {
    let rows = sets.iter().flat_map(|s| {
        s.values.iter().zip(&s.features).zip(names).map(move |((v, x), name)| {
            vec![s.instance.clone(), name.clone(), v.to_string(), x.to_string()]
        })
    });
    csv_bytes(&["instance", "feature", "value", "feature_count"], rows)
}

/// Rebuilds attribution sets from a `shap/<model>.csv` file. Feature
/// columns follow their first appearance.
pub fn read_shap_csv(path: &Path) -> AppResult<(Vec<AttributionSet>, Vec<String>)> {
    let mut r = csv::Reader::from_path(path)?;
    let mut names: Vec<String> = Vec::new();
    let mut column: BTreeMap<String, usize> = BTreeMap::new();
    let mut sets: Vec<AttributionSet> = Vec::new();
    for rec in r.deserialize::<(String, String, f64, f64)>() {
        let (instance, feature, value, count) = rec?;
        let j = *column.entry(feature.clone()).or_insert_with(|| {
            names.push(feature);
            names.len() - 1
        });
        if sets.last().map(|s| s.instance != instance).unwrap_or(true) {
            sets.push(AttributionSet { instance, values: vec![], base_value: 0.0, score: 0.0, features: vec![] });
        }
        let s = sets.last_mut().expect("pushed above");
        if s.values.len() != j {
            return Err(AppError::Config(format!("{}: features out of order", path.display())));
        }
        s.values.push(value);
        s.features.push(count);
    }
    Ok((sets, names))
}

pub fn ranking_json(panels: &[(String, Vec<RankedFeature>)]) -> serde_json::Value {
    serde_json::Value::Object(
        panels
            .iter()
            .map(|(model, feats)| {
                let list = feats
                    .iter()
                    .map(|f| serde_json::json!({ "feature": f.name, "mean_abs_attribution": f.mean_abs }))
                    .collect();
                (model.clone(), serde_json::Value::Array(list))
            })
            .collect(),
    )
}
