//! Command-line front end. Exit codes: 0 on success, 1 when a stage or a
//! model failed (see the `FAILED` file), 2 for invalid arguments or
//! configuration.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use spamlab_core::eval::Metric;

use crate::config::{parse_model_list, RunConfig};
use crate::error::AppResult;
use crate::pipeline::{self, PipelineError, ReportBundle};

#[derive(Debug, Parser)]
#[command(name = "spamlab", version, about = "Train, compare and explain twelve spam classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cross-validate every model, test on the holdout, explain and plot.
    Run(CommonArgs),
    /// Repeat cross-validation at several dictionary sizes.
    AblateFeatures {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated dictionary sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Cross-validate with and without preprocessing.
    AblatePrep(CommonArgs),
    /// Paired t-tests over repeated random splits.
    Compare(CommonArgs),
    /// Shapley attributions for the configured explained models.
    Explain {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated model slugs to explain.
        #[arg(long)]
        explain_models: Option<String>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        background: Option<usize>,
    },
    /// Redraw roc.svg and summary.svg from an output directory's CSVs.
    Plot {
        #[arg(long, default_value = "spamlab-out")]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
}

/// Flags mirroring [`RunConfig`]; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus directory (defaults to $ENRON_CORPUS_DIR).
    #[arg(long)]
    pub corpus_root: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dict_size: Option<usize>,
    /// Comma-separated model slugs, e.g. `random_forest,xgboost`.
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Keep HTML markup.
    #[arg(long)]
    pub keep_html: bool,
    #[arg(long)]
    pub keep_stopwords: bool,
    /// Keep noise words, single characters and numbers.
    #[arg(long)]
    pub keep_noise_words: bool,
    #[arg(long)]
    pub no_lemmatize: bool,
}

impl CommonArgs {
    /// Config file (or defaults) with these flags applied.
    pub fn resolve(&self) -> AppResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.corpus_root {
            cfg.corpus_root = Some(v.clone());
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.dict_size {
            cfg.dict_size = v;
        }
        if let Some(v) = &self.models {
            let kinds = parse_model_list(v)?;
            cfg.models = kinds
                .into_iter()
                .map(|k| cfg.models.iter().find(|m| m.kind == k).cloned().unwrap_or_else(|| k.into()))
                .collect();
        }
        if let Some(v) = self.train_fraction {
            cfg.train_fraction = v;
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        if let Some(v) = self.repeats {
            cfg.repeats = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = Some(v);
        }
        cfg.prep.strip_html &= !self.keep_html;
        cfg.prep.remove_stopwords &= !self.keep_stopwords;
        cfg.prep.remove_noise_words &= !self.keep_noise_words;
        cfg.prep.lemmatize &= !self.no_lemmatize;
        cfg.resolve_corpus_root();
        Ok(cfg)
    }
}

fn print_summary(bundle: &ReportBundle) {
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
    for m in &bundle.models {
        let get = |metric| m.cv.get(&metric).and_then(|s| s.mean);
        println!(
            "{:<20} {:<6} F={} AUC={}",
            m.model,
            m.status,
            fmt(get(Metric::Fscore)),
            fmt(get(Metric::Auc))
        );
    }
    for f in &bundle.failures {
        println!("failure in {}{}: {}", f.stage, f.model.as_deref().map(|m| format!(" ({m})")).unwrap_or_default(), f.error);
    }
    println!("output written to {}", bundle.config.output_dir.display());
}

fn finish(result: Result<ReportBundle, PipelineError>) -> i32 {
    match result {
        Ok(bundle) => {
            print_summary(&bundle);
            if bundle.succeeded() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn with_config(common: &CommonArgs, edit: impl FnOnce(&mut RunConfig) -> AppResult<()>) -> Result<RunConfig, PipelineError> {
    let mut cfg = common.resolve().map_err(PipelineError::Config)?;
    edit(&mut cfg).map_err(PipelineError::Config)?;
    Ok(cfg)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(c) => with_config(c, |_| Ok(())).and_then(|cfg| pipeline::run(&cfg)),
        Command::AblatePrep(c) => with_config(c, |_| Ok(())).and_then(|cfg| pipeline::ablate_prep(&cfg)),
        Command::Compare(c) => with_config(c, |_| Ok(())).and_then(|cfg| pipeline::compare(&cfg)),
        Command::AblateFeatures { common, sizes } => with_config(common, |cfg| {
            if let Some(s) = sizes {
                cfg.feature_sizes = s.clone();
            }
            Ok(())
        })
        .and_then(|cfg| pipeline::ablate_features(&cfg)),
        Command::Explain { common, explain_models, instances, permutations, background } => with_config(common, |cfg| {
            if let Some(m) = explain_models {
                cfg.explain.models = parse_model_list(m)?;
            }
            if let Some(v) = instances {
                cfg.explain.instances = *v;
            }
            if let Some(v) = permutations {
                cfg.explain.permutations = *v;
            }
            if let Some(v) = background {
                cfg.explain.background = *v;
            }
            Ok(())
        })
        .and_then(|cfg| pipeline::explain_only(&cfg)),
        Command::Plot { output_dir, top_k } => {
            return match pipeline::plot(output_dir, *top_k) {
                Ok(files) => {
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            };
        }
    };
    finish(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_defaults() {
        let cli = Cli::try_parse_from([
            "spamlab",
            "run",
            "--corpus-root",
            "/tmp/x",
            "--seed",
            "9",
            "--models",
            "knn,xgboost",
            "--keep-html",
        ])
        .unwrap();
        let Command::Run(c) = cli.command else { panic!() };
        let cfg = c.resolve().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.models.len(), 2);
        assert!(!cfg.prep.strip_html);
        assert!(cfg.prep.lemmatize);
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run(["spamlab", "frobnicate"]), 2);
    }
}
