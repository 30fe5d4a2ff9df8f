//! The batch pipeline behind every subcommand.
//!
//! Stages run in order: load, balance, split, preprocess, train and
//! evaluate, significance, explain, report. Within a stage work is spread
//! over a rayon pool sized by `threads`. A stage that cannot continue
//! stops the run; a single model that fails is recorded and the run goes
//! on without it. Either way a `FAILED` file naming the stages is left
//! next to whatever was written.

use std::collections::BTreeMap;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use spamlab_core::corpus::{self, ClassCounts};
use spamlab_core::eval::{self, FoldMetrics, FoldOutcome, FoldReport, LabeledStreams, MeanRoc, Metric, MetricSummary};
use spamlab_core::explain::{self, AttributionSet, Background, RankedFeature};
use spamlab_core::stats::{self, SignificanceMatrix};
use spamlab_core::textprep::{self, PrepFlags};
use spamlab_core::vectorize::vectorize;
use spamlab_core::{rng, ClassifierKind, ClassifierSpec, Corpus, Dictionary, Label, SplitPlan, TrainedModel};

use crate::config::RunConfig;
use crate::corpus_io;
use crate::error::{AppError, AppResult};
use crate::report::{self, ArtifactEntry, OutputDir, REPORT_FILE, REPORT_SCHEMA_VERSION};
use crate::svg;
use crate::timing::MedianTimer;

pub const STAGE_LOAD: &str = "load";
pub const STAGE_BALANCE: &str = "balance";
pub const STAGE_SPLIT: &str = "split";
pub const STAGE_PREPROCESS: &str = "preprocess";
pub const STAGE_TRAIN: &str = "train_evaluate";
pub const STAGE_SIGNIFICANCE: &str = "significance";
pub const STAGE_EXPLAIN: &str = "explain";
pub const STAGE_REPORT: &str = "report";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// Rejected before anything ran or was written.
    #[error(transparent)]
    Config(AppError),
    #[error("stage {stage} failed: {error}")]
    Stage { stage: &'static str, error: AppError },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { .. } => 1,
        }
    }
}

type PResult<T> = Result<T, PipelineError>;

fn at<T>(stage: &'static str, r: AppResult<T>) -> PResult<T> {
    r.map_err(|error| PipelineError::Stage { stage, error })
}

fn core_at<T>(stage: &'static str, r: spamlab_core::Result<T>) -> PResult<T> {
    at(stage, r.map_err(AppError::from))
}

/// A recorded, non-fatal failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusSummary {
    pub loaded: ClassCounts,
    pub skipped_files: usize,
    pub balanced: ClassCounts,
    pub train: usize,
    pub test: usize,
    pub folds: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub model: String,
    pub display_name: String,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub cv: BTreeMap<Metric, MetricSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout: Option<FoldMetrics>,
}

/// Everything `report.json` records about one command.
#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub data_assets: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<CorpusSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<ModelSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significance: Option<SignificanceMatrix>,
    /// What the paired samples of the significance tests are.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significance_samples: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub attributions: BTreeMap<String, Vec<RankedSummary>>,
    pub failures: Vec<Failure>,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<ArtifactEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankedSummary {
    pub feature: String,
    pub mean_abs_attribution: f64,
}

impl ReportBundle {
    fn new(command: &str, cfg: &RunConfig) -> Self {
        let mut data_assets = BTreeMap::new();
        data_assets.insert("stopwords".into(), report::sha256_hex(textprep::STOPWORDS_ASSET.as_bytes()));
        data_assets.insert("lemma_exceptions".into(), report::sha256_hex(textprep::LEMMA_EXCEPTIONS_ASSET.as_bytes()));
        ReportBundle {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.into(),
            config: cfg.clone(),
            config_hash: cfg.hash(),
            data_assets,
            corpus: None,
            models: vec![],
            significance: None,
            significance_samples: None,
            attributions: BTreeMap::new(),
            failures: vec![],
            wall_clock_seconds: 0.0,
            artifacts: vec![],
        }
    }

    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Corpus after loading, balancing, splitting and preprocessing.
pub struct Prepared {
    pub corpus: Corpus,
    pub plan: SplitPlan,
    pub data: LabeledStreams,
    pub summary: CorpusSummary,
}

fn corpus_hash(c: &Corpus) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for d in c.documents() {
        for part in [d.id.as_bytes(), d.label.as_str().as_bytes(), d.raw_text.as_bytes()] {
            h.update(part);
            h.update([0u8]);
        }
    }
    crate::config::hex(&h.finalize())
}

fn preprocess_all(corpus: &Corpus, flags: PrepFlags) -> PResult<LabeledStreams> {
    let prep = textprep::PrepConfig::bundled(flags);
    let streams = corpus.documents().par_iter().map(|d| textprep::preprocess(d, &prep)).collect();
    let labels: Vec<Label> = corpus.documents().iter().map(|d| d.label).collect();
    core_at(STAGE_PREPROCESS, LabeledStreams::new(streams, labels))
}

/// Loads, balances, splits and preprocesses the configured corpus.
pub fn prepare(cfg: &RunConfig, flags: PrepFlags) -> PResult<Prepared> {
    let root = cfg.corpus_root().map_err(PipelineError::Config)?;
    let loaded = at(STAGE_LOAD, corpus_io::load_corpus(root))?;
    info!("loaded {} documents ({} skipped)", loaded.len(), loaded.skipped_files);
    let corpus = core_at(STAGE_BALANCE, corpus::balance(&loaded, cfg.seed))?;
    let plan = core_at(STAGE_SPLIT, corpus::split(&corpus, cfg.train_fraction, cfg.folds, cfg.seed))?;
    let data = preprocess_all(&corpus, flags)?;
    let summary = CorpusSummary {
        loaded: loaded.class_counts(),
        skipped_files: loaded.skipped_files,
        balanced: corpus.class_counts(),
        train: plan.train_ids.len(),
        test: plan.test_ids.len(),
        folds: plan.folds.len(),
        sha256: corpus_hash(&loaded),
    };
    Ok(Prepared { corpus, plan, data, summary })
}

#[derive(Debug)]
pub struct ModelFailure {
    pub kind: ClassifierKind,
    pub error: AppError,
}

/// Cross-validation folds and (optionally) the holdout evaluation of one
/// model.
pub struct ModelRun {
    pub spec: ClassifierSpec,
    pub report: FoldReport,
    pub folds: Vec<FoldOutcome>,
    pub holdout: Option<FoldOutcome>,
    pub roc: Option<MeanRoc>,
}

impl ModelRun {
    pub fn mean_predict_seconds(&self) -> Option<f64> {
        self.report.mean(Metric::PredictSeconds)
    }
}

/// Evaluates every spec on every fold, plus the train/test holdout when
/// `holdout` is set. Jobs run in parallel; results keep spec order.
pub fn evaluate_models(
    specs: &[ClassifierSpec],
    prepared: &Prepared,
    dict_size: usize,
    holdout: bool,
) -> Vec<Result<ModelRun, ModelFailure>> {
    let plan = &prepared.plan;
    let rounds = plan.folds.len() + usize::from(holdout);
    let jobs: Vec<(usize, usize)> = (0..specs.len()).flat_map(|m| (0..rounds).map(move |r| (m, r))).collect();
    let timer = MedianTimer::default();
    let results: Vec<spamlab_core::Result<FoldOutcome>> = jobs
        .par_iter()
        .map(|&(m, r)| {
            let spec = &specs[m];
            if r < plan.folds.len() {
                let train = eval::fold_train_ids(plan, r);
                eval::evaluate_split(spec, &prepared.data, &train, &plan.folds[r], dict_size, r.to_string(), &timer)
            } else {
                eval::evaluate_split(
                    spec,
                    &prepared.data,
                    &plan.train_ids,
                    &plan.test_ids,
                    dict_size,
                    "holdout".into(),
                    &timer,
                )
            }
        })
        .collect();
    let mut results = results.into_iter();
    specs
        .iter()
        .map(|spec| {
            let mine: Vec<_> = results.by_ref().take(rounds).collect();
            let mut outcomes = Vec::with_capacity(rounds);
            for o in mine {
                match o {
                    Ok(o) => outcomes.push(o),
                    Err(e) => return Err(ModelFailure { kind: spec.kind, error: e.into() }),
                }
            }
            let holdout = if holdout { outcomes.pop() } else { None };
            let report = FoldReport::new(spec.kind.slug().into(), outcomes.iter().map(|o| o.metrics.clone()).collect());
            let curves: Vec<_> = outcomes.iter().filter_map(|o| o.roc.clone()).collect();
            let roc = if curves.len() == outcomes.len() { MeanRoc::from_curves(&curves) } else { None };
            Ok(ModelRun { spec: spec.clone(), report, folds: outcomes, holdout, roc })
        })
        .collect()
}

/// Runs `f` on a rayon pool limited to `threads` workers.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> AppResult<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Shapley attributions for one fitted model over `instances` randomly
/// chosen test documents.
pub fn explain_model(
    cfg: &RunConfig,
    prepared: &Prepared,
    model: &TrainedModel,
    dictionary: &Dictionary,
) -> AppResult<Vec<AttributionSet>> {
    let train = prepared.data.matrix(&prepared.plan.train_ids, dictionary)?;
    let bg = Background::sample(&train, cfg.explain.background, cfg.seed)?;
    let mut ids = prepared.plan.test_ids.clone();
    rng::shuffle(&mut rng::stage_rng(cfg.seed, rng::STREAM_INSTANCES), &mut ids);
    ids.truncate(cfg.explain.instances);
    let index: BTreeMap<&str, usize> =
        prepared.data.streams().iter().enumerate().map(|(i, s)| (s.doc_id.as_str(), i)).collect();
    let sets = ids
        .par_iter()
        .enumerate()
        .map(|(i, id)| {
            let stream = &prepared.data.streams()[index[id.as_str()]];
            let x = vectorize(stream, dictionary);
            if x.len() <= explain::MAX_EXACT_FEATURES {
                explain::shapley_exact(model, &x, &bg, id)
            } else {
                explain::shapley_sample(model, &x, &bg, cfg.explain.permutations, cfg.seed.wrapping_add(i as u64), id)
            }
        })
        .collect::<spamlab_core::Result<Vec<_>>>()?;
    Ok(sets)
}

fn dictionary_csv(dict: &Dictionary) -> AppResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["word", "count"])?;
    for (word, count) in dict.entries() {
        w.write_record([word.as_str(), &count.to_string()])?;
    }
    w.into_inner().map_err(|e| AppError::Config(format!("csv buffer: {e}")))
}

fn model_json(model: &TrainedModel) -> AppResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(model)?;
    v.push(b'\n');
    Ok(v)
}

fn finish(out: &mut OutputDir, mut bundle: ReportBundle, started: Instant) -> PResult<ReportBundle> {
    if !bundle.failures.is_empty() {
        let mut stages: Vec<String> = Vec::new();
        for f in &bundle.failures {
            let line = match &f.model {
                Some(m) => format!("{} ({m}): {}", f.stage, f.error),
                None => format!("{}: {}", f.stage, f.error),
            };
            stages.push(line);
        }
        at(STAGE_REPORT, out.mark_failed(&stages))?;
    }
    bundle.artifacts = at(STAGE_REPORT, out.manifest())?;
    bundle.wall_clock_seconds = started.elapsed().as_secs_f64();
    let mut json = at(STAGE_REPORT, serde_json::to_vec_pretty(&bundle).map_err(AppError::from))?;
    json.push(b'\n');
    at(STAGE_REPORT, out.write(REPORT_FILE, &json))?;
    Ok(bundle)
}

/// Validates, creates the output directory and runs `body`. A fatal stage
/// error leaves a `FAILED` file naming the stage.
fn guarded(
    cfg: &RunConfig,
    command: &str,
    body: impl FnOnce(&mut OutputDir, &mut ReportBundle) -> PResult<()> + Send,
) -> PResult<ReportBundle> {
    cfg.validate().map_err(PipelineError::Config)?;
    let started = Instant::now();
    let mut out = OutputDir::create(&cfg.output_dir).map_err(PipelineError::Config)?;
    let mut bundle = ReportBundle::new(command, cfg);
    let result = with_threads(cfg.threads, || body(&mut out, &mut bundle)).map_err(PipelineError::Config)?;
    if let Err(e) = result {
        if let PipelineError::Stage { stage, error } = &e {
            let _ = out.mark_failed(&[format!("{stage}: {error}")]);
        }
        return Err(e);
    }
    finish(&mut out, bundle, started)
}

fn model_summary(run: &ModelRun) -> ModelSummary {
    ModelSummary {
        model: run.spec.kind.slug().into(),
        display_name: run.spec.kind.display_name().into(),
        status: "ok",
        error: None,
        cv: run.report.summary.clone(),
        holdout: run.holdout.as_ref().map(|h| h.metrics.clone()),
    }
}

fn failed_summary(kind: ClassifierKind, error: &AppError) -> ModelSummary {
    ModelSummary {
        model: kind.slug().into(),
        display_name: kind.display_name().into(),
        status: "failed",
        error: Some(error.to_string()),
        cv: BTreeMap::new(),
        holdout: None,
    }
}

/// Splits evaluation results into successes and recorded failures.
fn collect_runs(
    results: Vec<Result<ModelRun, ModelFailure>>,
    bundle: &mut ReportBundle,
) -> Vec<ModelRun> {
    let mut ok = Vec::new();
    for r in results {
        match r {
            Ok(run) => {
                bundle.models.push(model_summary(&run));
                ok.push(run);
            }
            Err(ModelFailure { kind, error }) => {
                warn!("{} failed: {error}", kind.slug());
                bundle.models.push(failed_summary(kind, &error));
                bundle.failures.push(Failure {
                    stage: STAGE_TRAIN.into(),
                    model: Some(kind.slug().into()),
                    error: error.to_string(),
                });
            }
        }
    }
    ok
}

/// Paired tests over per-sample F-scores. Models with an undefined score
/// in any sample are left out and recorded.
fn significance(
    names: &[String],
    scores: Vec<Vec<Option<f64>>>,
    bundle: &mut ReportBundle,
) -> Option<SignificanceMatrix> {
    let mut kept_names = Vec::new();
    let mut kept = Vec::new();
    for (name, s) in names.iter().zip(scores) {
        match s.into_iter().collect::<Option<Vec<f64>>>() {
            Some(v) => {
                kept_names.push(name.clone());
                kept.push(v);
            }
            None => bundle.failures.push(Failure {
                stage: STAGE_SIGNIFICANCE.into(),
                model: Some(name.clone()),
                error: "F-score undefined in at least one sample".into(),
            }),
        }
    }
    if kept.len() < 2 {
        warn!("significance needs at least two models with scores; skipping");
        return None;
    }
    match stats::compare_all(&kept_names, &kept) {
        Ok(m) => Some(m),
        Err(e) => {
            bundle.failures.push(Failure { stage: STAGE_SIGNIFICANCE.into(), model: None, error: e.to_string() });
            None
        }
    }
}

fn write_significance(out: &mut OutputDir, m: Option<&SignificanceMatrix>) -> AppResult<()> {
    let empty = SignificanceMatrix { models: vec![], pairs: vec![] };
    out.write("significance.csv", &report::significance_csv(m.unwrap_or(&empty))?)
}

/// Explains the models in `cfg.explain.models` that appear in `fitted`,
/// writing `shap/<model>.csv` and `summary.svg`.
fn explain_stage(
    cfg: &RunConfig,
    prepared: &Prepared,
    fitted: &[(ClassifierKind, &TrainedModel, &Dictionary)],
    out: &mut OutputDir,
    bundle: &mut ReportBundle,
) -> PResult<()> {
    let mut panels: Vec<(ClassifierKind, Vec<RankedFeature>)> = Vec::new();
    for &kind in &cfg.explain.models {
        let Some(&(_, model, dict)) = fitted.iter().find(|f| f.0 == kind) else {
            warn!("{} is not among the fitted models; not explained", kind.slug());
            continue;
        };
        info!("explaining {}", kind.slug());
        let names: Vec<String> = dict.words().map(String::from).collect();
        let ranked = explain_model(cfg, prepared, model, dict).and_then(|sets| {
            out.write(&format!("shap/{}.csv", kind.slug()), &report::shap_csv(&sets, &names)?)?;
            Ok(explain::summary_ranking(&sets, &names, cfg.explain.top_k)?)
        });
        match ranked {
            Ok(r) => {
                bundle.attributions.insert(
                    kind.slug().into(),
                    r.iter().map(|f| RankedSummary { feature: f.name.clone(), mean_abs_attribution: f.mean_abs }).collect(),
                );
                panels.push((kind, r));
            }
            Err(e) => bundle.failures.push(Failure {
                stage: STAGE_EXPLAIN.into(),
                model: Some(kind.slug().into()),
                error: e.to_string(),
            }),
        }
    }
    // Slug order, as `plot` reads them back from `shap/`.
    panels.sort_by_key(|p| p.0.slug());
    let panels: Vec<_> = panels.into_iter().map(|(k, r)| (k.display_name().to_string(), r)).collect();
    at(STAGE_EXPLAIN, out.write("summary.svg", svg::summary_svg(&panels).as_bytes()))
}

/// Full pipeline: cross-validation and holdout for every model, paired
/// tests over the fold F-scores, Shapley explanations, CSVs, plots and
/// `report.json`.
pub fn run(cfg: &RunConfig) -> PResult<ReportBundle> {
    guarded(cfg, "run", |out, bundle| {
        let prepared = prepare(cfg, cfg.prep)?;
        bundle.corpus = Some(prepared.summary.clone());
        at(STAGE_SPLIT, {
            let text = serde_json::to_vec_pretty(&prepared.plan).map_err(AppError::from);
            text.and_then(|t| out.write("split.json", &t))
        })?;

        let runs = collect_runs(evaluate_models(&cfg.specs(), &prepared, cfg.dict_size, true), bundle);

        let rows: Vec<_> = runs.iter().map(|r| (r.report.clone(), r.holdout.as_ref().map(|h| h.metrics.clone()))).collect();
        at(STAGE_TRAIN, report::metrics_csv(&rows).and_then(|b| out.write("metrics.csv", &b)))?;
        let mut curves = Vec::new();
        for r in &runs {
            let slug = r.spec.kind.slug();
            if let Some(h) = &r.holdout {
                at(STAGE_TRAIN, model_json(&h.model).and_then(|b| out.write(&format!("models/{slug}.json"), &b)))?;
            }
            if let Some(roc) = &r.roc {
                at(STAGE_TRAIN, report::roc_csv(roc).and_then(|b| out.write(&format!("roc/{slug}.csv"), &b)))?;
                curves.push((slug, r.spec.kind.display_name().to_string(), roc.clone()));
            }
        }
        if let Some(h) = runs.iter().find_map(|r| r.holdout.as_ref()) {
            at(STAGE_TRAIN, dictionary_csv(&h.dictionary).and_then(|b| out.write("dictionary.csv", &b)))?;
        }
        curves.sort_by_key(|c| c.0);
        let curves: Vec<_> = curves.into_iter().map(|(_, name, roc)| (name, roc)).collect();
        at(STAGE_TRAIN, out.write("roc.svg", svg::roc_svg(&curves).as_bytes()))?;

        let names: Vec<String> = runs.iter().map(|r| r.spec.kind.slug().to_string()).collect();
        let scores = runs.iter().map(|r| r.report.folds.iter().map(|f| f.fscore).collect()).collect();
        let sig = significance(&names, scores, bundle);
        bundle.significance_samples = Some("cross-validation fold F-scores".into());
        at(STAGE_SIGNIFICANCE, write_significance(out, sig.as_ref()))?;
        bundle.significance = sig;

        let fitted: Vec<_> = runs
            .iter()
            .filter_map(|r| r.holdout.as_ref().map(|h| (r.spec.kind, &h.model, &h.dictionary)))
            .collect();
        explain_stage(cfg, &prepared, &fitted, out, bundle)
    })
}

/// Reruns cross-validation at each dictionary size in `cfg.feature_sizes`.
pub fn ablate_features(cfg: &RunConfig) -> PResult<ReportBundle> {
    guarded(cfg, "ablate-features", |out, bundle| {
        let prepared = prepare(cfg, cfg.prep)?;
        bundle.corpus = Some(prepared.summary.clone());
        let specs = cfg.specs();
        let mut header: Vec<String> =
            vec!["dict_size".into(), "mean_fscore".into(), "mean_predict_seconds".into()];
        header.extend(specs.iter().map(|s| format!("{}_fscore", s.kind.slug())));
        let mut rows: Vec<Vec<String>> = Vec::new();
        for &size in &cfg.feature_sizes {
            info!("dictionary size {size}");
            let results = evaluate_models(&specs, &prepared, size, false);
            let mut per_model = Vec::new();
            let (mut f_sum, mut f_n, mut t_sum, mut t_n) = (0.0, 0usize, 0.0, 0usize);
            for r in results {
                match r {
                    Ok(run) => {
                        let f = run.report.mean(Metric::Fscore);
                        if let Some(f) = f {
                            f_sum += f;
                            f_n += 1;
                        }
                        if let Some(t) = run.mean_predict_seconds() {
                            t_sum += t;
                            t_n += 1;
                        }
                        per_model.push(f.map(|v| v.to_string()).unwrap_or_default());
                    }
                    Err(ModelFailure { kind, error }) => {
                        bundle.failures.push(Failure {
                            stage: STAGE_TRAIN.into(),
                            model: Some(format!("{}@{size}", kind.slug())),
                            error: error.to_string(),
                        });
                        per_model.push(String::new());
                    }
                }
            }
            let avg = |s: f64, n: usize| if n > 0 { (s / n as f64).to_string() } else { String::new() };
            let mut row = vec![size.to_string(), avg(f_sum, f_n), avg(t_sum, t_n)];
            row.extend(per_model);
            rows.push(row);
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let bytes = (|| -> AppResult<Vec<u8>> {
            w.write_record(&header)?;
            for r in &rows {
                w.write_record(r)?;
            }
            w.into_inner().map_err(|e| AppError::Config(format!("csv buffer: {e}")))
        })();
        at(STAGE_REPORT, bytes.and_then(|b| out.write("feature_sizes.csv", &b)))
    })
}

/// Cross-validation with `cfg.prep` against `cfg.ablation_prep` on the
/// same split.
pub fn ablate_prep(cfg: &RunConfig) -> PResult<ReportBundle> {
    guarded(cfg, "ablate-prep", |out, bundle| {
        let on = prepare(cfg, cfg.prep)?;
        bundle.corpus = Some(on.summary.clone());
        let off_data = preprocess_all(&on.corpus, cfg.ablation_prep)?;
        let off = Prepared { corpus: on.corpus.clone(), plan: on.plan.clone(), data: off_data, summary: on.summary.clone() };
        let specs = cfg.specs();
        let arm_on = evaluate_models(&specs, &on, cfg.dict_size, false);
        let arm_off = evaluate_models(&specs, &off, cfg.dict_size, false);
        let mut rows = Vec::new();
        for (spec, (a, b)) in specs.iter().zip(arm_on.into_iter().zip(arm_off)) {
            let mut score = |r: Result<ModelRun, ModelFailure>, arm: &str| match r {
                Ok(run) => run.report.mean(Metric::Fscore),
                Err(ModelFailure { error: e, .. }) => {
                    bundle.failures.push(Failure {
                        stage: STAGE_TRAIN.into(),
                        model: Some(format!("{} ({arm})", spec.kind.slug())),
                        error: e.to_string(),
                    });
                    None
                }
            };
            let (f_on, f_off) = (score(a, "on"), score(b, "off"));
            let ratio = match (f_on, f_off) {
                (Some(x), Some(y)) if y > 0.0 => Some(x / y),
                _ => None,
            };
            let s = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            rows.push(vec![spec.kind.slug().to_string(), s(f_on), s(f_off), s(ratio)]);
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let bytes = (|| -> AppResult<Vec<u8>> {
            w.write_record(["model", "fscore_on", "fscore_off", "ratio"])?;
            for r in &rows {
                w.write_record(r)?;
            }
            w.into_inner().map_err(|e| AppError::Config(format!("csv buffer: {e}")))
        })();
        at(STAGE_REPORT, bytes.and_then(|b| out.write("prep_ablation.csv", &b)))
    })
}

/// Holdout F-scores over `cfg.repeats` random splits (repeat `r` uses seed
/// `seed + r` for the split and the models), then all pairwise tests.
pub fn compare(cfg: &RunConfig) -> PResult<ReportBundle> {
    guarded(cfg, "compare", |out, bundle| {
        let base = prepare(cfg, cfg.prep)?;
        bundle.corpus = Some(base.summary.clone());
        let plans = (0..cfg.repeats as u64)
            .map(|r| core_at(STAGE_SPLIT, corpus::split(&base.corpus, cfg.train_fraction, cfg.folds, cfg.seed.wrapping_add(r))))
            .collect::<PResult<Vec<_>>>()?;
        let kinds: Vec<_> = cfg.models.iter().collect();
        let jobs: Vec<(usize, usize)> = (0..plans.len()).flat_map(|r| (0..kinds.len()).map(move |m| (r, m))).collect();
        let timer = MedianTimer::default();
        let results: Vec<spamlab_core::Result<FoldMetrics>> = jobs
            .par_iter()
            .map(|&(r, m)| {
                let spec = kinds[m].spec(cfg.seed.wrapping_add(r as u64));
                let p = &plans[r];
                eval::evaluate_split(&spec, &base.data, &p.train_ids, &p.test_ids, cfg.dict_size, r.to_string(), &timer)
                    .map(|o| o.metrics)
            })
            .collect();
        let mut scores: Vec<Vec<Option<f64>>> = vec![Vec::new(); kinds.len()];
        let mut broken = vec![false; kinds.len()];
        let mut rows = Vec::new();
        for (&(r, m), res) in jobs.iter().zip(results) {
            match res {
                Ok(metrics) => {
                    let s = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                    rows.push(vec![r.to_string(), kinds[m].kind.slug().into(), s(metrics.fscore), s(metrics.auc)]);
                    scores[m].push(metrics.fscore);
                }
                Err(e) => {
                    if !broken[m] {
                        bundle.failures.push(Failure {
                            stage: STAGE_TRAIN.into(),
                            model: Some(kinds[m].kind.slug().into()),
                            error: format!("repeat {r}: {e}"),
                        });
                    }
                    broken[m] = true;
                }
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let bytes = (|| -> AppResult<Vec<u8>> {
            w.write_record(["repeat", "model", "fscore", "auc"])?;
            for r in &rows {
                w.write_record(r)?;
            }
            w.into_inner().map_err(|e| AppError::Config(format!("csv buffer: {e}")))
        })();
        at(STAGE_REPORT, bytes.and_then(|b| out.write("repeats.csv", &b)))?;

        let names: Vec<String> =
            kinds.iter().zip(&broken).filter(|(_, &b)| !b).map(|(k, _)| k.kind.slug().to_string()).collect();
        let kept: Vec<Vec<Option<f64>>> =
            scores.into_iter().zip(&broken).filter(|(_, &b)| !b).map(|(s, _)| s).collect();
        let sig = significance(&names, kept, bundle);
        bundle.significance_samples = Some(format!("holdout F-scores over {} random splits", cfg.repeats));
        at(STAGE_SIGNIFICANCE, write_significance(out, sig.as_ref()))?;
        bundle.significance = sig;
        Ok(())
    })
}

/// Fits the explained models on the training split and writes their
/// attributions and summary plot.
pub fn explain_only(cfg: &RunConfig) -> PResult<ReportBundle> {
    guarded(cfg, "explain", |out, bundle| {
        let prepared = prepare(cfg, cfg.prep)?;
        bundle.corpus = Some(prepared.summary.clone());
        let dictionary = core_at(STAGE_TRAIN, prepared.data.dictionary(&prepared.plan.train_ids, cfg.dict_size))?;
        let train = core_at(STAGE_TRAIN, prepared.data.matrix(&prepared.plan.train_ids, &dictionary))?;
        let specs: Vec<ClassifierSpec> = cfg
            .explain
            .models
            .iter()
            .map(|&k| match cfg.models.iter().find(|m| m.kind == k) {
                Some(entry) => entry.spec(cfg.seed),
                None => ClassifierSpec::new(k, cfg.seed),
            })
            .collect();
        let fits: Vec<_> = specs.par_iter().map(|s| TrainedModel::fit(s, &train)).collect();
        let mut models = Vec::new();
        for (spec, fit) in specs.iter().zip(fits) {
            match fit {
                Ok(m) => models.push((spec.kind, m)),
                Err(e) => bundle.failures.push(Failure {
                    stage: STAGE_TRAIN.into(),
                    model: Some(spec.kind.slug().into()),
                    error: e.to_string(),
                }),
            }
        }
        at(STAGE_TRAIN, dictionary_csv(&dictionary).and_then(|b| out.write("dictionary.csv", &b)))?;
        let fitted: Vec<_> = models.iter().map(|(k, m)| (*k, m, &dictionary)).collect();
        explain_stage(cfg, &prepared, &fitted, out, bundle)
    })
}

/// Re-renders `roc.svg` and `summary.svg` from the CSVs in `dir`.
pub fn plot(dir: &std::path::Path, top_k: usize) -> AppResult<Vec<std::path::PathBuf>> {
    let display = |stem: &str| ClassifierKind::from_slug(stem).map(|k| k.display_name().to_string()).unwrap_or(stem.into());
    let csvs = |sub: &str| -> AppResult<Vec<std::path::PathBuf>> {
        let d = dir.join(sub);
        if !d.is_dir() {
            return Ok(vec![]);
        }
        let mut v: Vec<_> = std::fs::read_dir(&d)
            .map_err(|e| AppError::io(&d, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        v.sort();
        Ok(v)
    };
    let stem = |p: &std::path::Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let roc_files = csvs("roc")?;
    let shap_files = csvs("shap")?;
    if roc_files.is_empty() && shap_files.is_empty() {
        return Err(AppError::Config(format!("{} has no roc/ or shap/ CSV files", dir.display())));
    }
    let mut written = Vec::new();
    if !roc_files.is_empty() {
        let curves = roc_files.iter().map(|p| Ok((display(&stem(p)), report::read_roc_csv(p)?))).collect::<AppResult<Vec<_>>>()?;
        let path = dir.join("roc.svg");
        std::fs::write(&path, svg::roc_svg(&curves)).map_err(|e| AppError::io(&path, e))?;
        written.push(path);
    }
    let mut panels = Vec::new();
    for p in &shap_files {
        let (sets, names) = report::read_shap_csv(p)?;
        panels.push((display(&stem(p)), explain::summary_ranking(&sets, &names, top_k)?));
    }
    let path = dir.join("summary.svg");
    std::fs::write(&path, svg::summary_svg(&panels)).map_err(|e| AppError::io(&path, e))?;
    written.push(path);
    Ok(written)
}
