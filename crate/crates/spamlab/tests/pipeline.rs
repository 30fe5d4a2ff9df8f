use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use spamlab::config::{ModelEntry, RunConfig};
use spamlab::pipeline::{self, PipelineError};
use spamlab::report::{sha256_hex, FAILED_FILE};
use spamlab_core::ClassifierKind;

fn toy_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy")
}

fn toy_config(out: &Path) -> RunConfig {
    RunConfig { corpus_root: Some(toy_root()), output_dir: out.to_path_buf(), ..RunConfig::default() }
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn default_run_on_toy_corpus_writes_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let start = Instant::now();
    let bundle = pipeline::run(&cfg).unwrap();
    assert!(start.elapsed().as_secs() < 60);
    assert!(bundle.succeeded(), "{:?}", bundle.failures);

    for f in ["metrics.csv", "significance.csv", "report.json", "roc.svg", "summary.svg", "split.json", "dictionary.csv"] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
    for kind in ClassifierKind::ALL {
        assert!(tmp.path().join(format!("roc/{}.csv", kind.slug())).is_file());
        assert!(tmp.path().join(format!("models/{}.json", kind.slug())).is_file());
    }
    for kind in [ClassifierKind::RandomForest, ClassifierKind::Xgboost, ClassifierKind::Mpnn] {
        assert!(tmp.path().join(format!("shap/{}.csv", kind.slug())).is_file());
    }
    assert!(!tmp.path().join(FAILED_FILE).exists());

    // One report row per configured model.
    assert_eq!(bundle.models.len(), 12);
    // 5 folds + holdout + mean + std per model.
    assert_eq!(csv_rows(&tmp.path().join("metrics.csv")).len(), 12 * 8);
    assert_eq!(csv_rows(&tmp.path().join("significance.csv")).len(), 66);
}

#[test]
fn manifest_covers_every_file_with_its_hash() {
    let tmp = tempfile::tempdir().unwrap();
    pipeline::run(&toy_config(tmp.path())).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    let listed: Vec<(String, String)> = report["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a["path"].as_str().unwrap().to_string(), a["sha256"].as_str().unwrap().to_string()))
        .collect();
    let mut on_disk = Vec::new();
    let mut stack = vec![tmp.path().to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(tmp.path()).unwrap().to_string_lossy().replace('\\', "/");
                if rel != "report.json" {
                    on_disk.push(rel);
                }
            }
        }
    }
    on_disk.sort();
    assert_eq!(listed.iter().map(|l| l.0.clone()).collect::<Vec<_>>(), on_disk);
    for (path, hash) in listed {
        assert_eq!(sha256_hex(&fs::read(tmp.path().join(&path)).unwrap()), hash, "{path}");
    }
    assert!(report["data_assets"]["stopwords"].is_string());
    assert!(report["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn identical_config_gives_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = pipeline::run(&toy_config(a.path())).unwrap();
    let mut cfg_b = toy_config(b.path());
    cfg_b.threads = Some(1);
    let rb = pipeline::run(&cfg_b).unwrap();
    assert_eq!(fs::read(a.path().join("metrics.csv")).unwrap(), fs::read(b.path().join("metrics.csv")).unwrap());
    let strip = |v: &[spamlab::report::ArtifactEntry]| v.to_vec();
    assert_eq!(strip(&ra.artifacts), strip(&rb.artifacts));
}

#[test]
fn invalid_corpus_root_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut cfg = toy_config(&out);
    cfg.corpus_root = Some(tmp.path().join("missing"));
    let err = pipeline::run(&cfg).err().unwrap();
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());
}

#[test]
fn stage_failure_leaves_marker() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    fs::create_dir_all(corpus.join("ham")).unwrap();
    for i in 0..5 {
        fs::write(corpus.join(format!("ham/{i}.txt")), "hello there").unwrap();
    }
    let out = tmp.path().join("out");
    let mut cfg = toy_config(&out);
    cfg.corpus_root = Some(corpus);
    match pipeline::run(&cfg) {
        Err(PipelineError::Stage { stage, .. }) => assert_eq!(stage, pipeline::STAGE_BALANCE),
        other => panic!("{other:?}"),
    }
    let marker = fs::read_to_string(out.join(FAILED_FILE)).unwrap();
    assert!(marker.starts_with("balance"));
}

#[test]
fn single_size_sweep_matches_plain_run() {
    let tmp = tempfile::tempdir().unwrap();
    let models: Vec<ModelEntry> =
        [ClassifierKind::BernoulliNb, ClassifierKind::LogisticRegression, ClassifierKind::Knn].map(Into::into).to_vec();
    let mut cfg = toy_config(&tmp.path().join("sweep"));
    cfg.models = models.clone();
    cfg.feature_sizes = vec![25];
    pipeline::ablate_features(&cfg).unwrap();
    let rows = csv_rows(&tmp.path().join("sweep/feature_sizes.csv"));
    assert_eq!(rows.len(), 1);

    let mut plain = toy_config(&tmp.path().join("plain"));
    plain.models = models;
    plain.dict_size = 25;
    plain.explain.models = vec![];
    let bundle = pipeline::run(&plain).unwrap();
    let means: Vec<f64> = bundle
        .models
        .iter()
        .map(|m| m.cv[&spamlab_core::eval::Metric::Fscore].mean.unwrap())
        .collect();
    let expected = means.iter().sum::<f64>() / means.len() as f64;
    assert_eq!(rows[0][0], "25");
    assert!((rows[0][1].parse::<f64>().unwrap() - expected).abs() < 1e-12);
    for (i, m) in means.iter().enumerate() {
        assert_eq!(rows[0][3 + i].parse::<f64>().unwrap(), *m);
    }
}

#[test]
fn sweep_has_one_row_per_size() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = toy_config(tmp.path());
    cfg.models = vec![ClassifierKind::MultinomialNb.into()];
    pipeline::ablate_features(&cfg).unwrap();
    let rows = csv_rows(&tmp.path().join("feature_sizes.csv"));
    assert_eq!(rows.iter().map(|r| r[0].parse::<usize>().unwrap()).collect::<Vec<_>>(), cfg.feature_sizes);
}

#[test]
fn prep_ablation_with_identical_arms_is_a_no_op() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = toy_config(tmp.path());
    cfg.ablation_prep = cfg.prep;
    pipeline::ablate_prep(&cfg).unwrap();
    let rows = csv_rows(&tmp.path().join("prep_ablation.csv"));
    assert_eq!(rows.len(), 12);
    for r in rows {
        assert_eq!(r[1], r[2], "{r:?}");
    }
}

#[test]
fn compare_produces_all_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = toy_config(tmp.path());
    cfg.repeats = 4;
    let bundle = pipeline::compare(&cfg).unwrap();
    assert_eq!(bundle.significance.as_ref().unwrap().pairs.len(), 66);
    assert_eq!(csv_rows(&tmp.path().join("repeats.csv")).len(), 4 * 12);
}

#[test]
fn plot_rerenders_identically() {
    let tmp = tempfile::tempdir().unwrap();
    pipeline::run(&toy_config(tmp.path())).unwrap();
    let roc = fs::read(tmp.path().join("roc.svg")).unwrap();
    let summary = fs::read(tmp.path().join("summary.svg")).unwrap();
    fs::remove_file(tmp.path().join("roc.svg")).unwrap();
    pipeline::plot(tmp.path(), 10).unwrap();
    assert_eq!(fs::read(tmp.path().join("roc.svg")).unwrap(), roc);
    assert_eq!(fs::read(tmp.path().join("summary.svg")).unwrap(), summary);
}

#[test]
fn svgs_parse_and_legend_follows_auc() {
    let tmp = tempfile::tempdir().unwrap();
    pipeline::run(&toy_config(tmp.path())).unwrap();
    let text = fs::read_to_string(tmp.path().join("roc.svg")).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.root_element().attribute("viewBox"), Some("0 0 800 600"));
    let legend: Vec<f64> = doc
        .descendants()
        .filter(|n| n.has_tag_name("text"))
        .filter_map(|n| n.text())
        .filter_map(|t| t.split("AUC = ").nth(1))
        .map(|t| t[..4].parse().unwrap())
        .collect();
    assert_eq!(legend.len(), 12);
    assert!(legend.windows(2).all(|w| w[0] >= w[1]));
    assert!(doc.descendants().any(|n| n.attribute("class") == Some("chance")));
    assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("band")).count(), 12);

    let summary = fs::read_to_string(tmp.path().join("summary.svg")).unwrap();
    let doc = roxmltree::Document::parse(&summary).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("panel")).count(), 3);
}
