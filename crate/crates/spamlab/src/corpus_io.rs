//! Reading Enron-style corpus trees and split plans from disk.
//!
//! A corpus root holds one directory per subset, each with `ham/` and/or
//! `spam/` folders of plain-text emails. A root that itself contains `ham/`
//! or `spam/` is read as a single subset.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use spamlab_core::{Corpus, Document, Label, SplitPlan};

use crate::error::{AppError, AppResult};

fn sorted_entries(dir: &Path) -> AppResult<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> =
        fs::read_dir(dir).map_err(|e| AppError::io(dir, e))?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    out.sort();
    Ok(out)
}

fn has_class_dirs(dir: &Path) -> bool {
    Label::ALL.iter().any(|l| dir.join(l.as_str()).is_dir())
}

/// Loads every file under `root`. Undecodable bytes become U+FFFD;
/// unreadable files are skipped and counted in [`Corpus::skipped_files`].
pub fn load_corpus(root: &Path) -> AppResult<Corpus> {
    if !root.is_dir() {
        return Err(AppError::Config(format!("corpus root {} is not a directory", root.display())));
    }
    let subsets: Vec<PathBuf> = if has_class_dirs(root) {
        vec![root.to_path_buf()]
    } else {
        sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect()
    };
    if subsets.is_empty() {
        return Err(spamlab_core::Error::MalformedCorpus(format!("{} holds no subset directories", root.display())).into());
    }
    let mut documents = Vec::new();
    let mut skipped = 0usize;
    for subset_dir in &subsets {
        if !has_class_dirs(subset_dir) {
            return Err(spamlab_core::Error::MalformedCorpus(format!(
                "subset {} has neither ham/ nor spam/",
                subset_dir.display()
            ))
            .into());
        }
        let subset = subset_dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for label in Label::ALL {
            let class_dir = subset_dir.join(label.as_str());
            if !class_dir.is_dir() {
                continue;
            }
            for file in sorted_entries(&class_dir)? {
                if !file.is_file() {
                    continue;
                }
                match fs::read(&file) {
                    Ok(bytes) => {
                        let name = file.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                        documents.push(Document {
                            id: format!("{subset}/{}/{name}", label.as_str()),
                            label,
                            raw_text: String::from_utf8_lossy(&bytes).into_owned(),
                            subset: subset.clone(),
                        });
                    }
                    Err(e) => {
                        warn!("skipping unreadable file {}: {e}", file.display());
                        skipped += 1;
                    }
                }
            }
        }
    }
    if documents.is_empty() {
        return Err(spamlab_core::Error::MalformedCorpus(format!("{} contains no documents", root.display())).into());
    }
    let mut corpus = Corpus::new(documents)?;
    corpus.skipped_files = skipped;
    Ok(corpus)
}

pub fn write_split_plan(plan: &SplitPlan, path: &Path) -> AppResult<()> {
    let text = serde_json::to_string_pretty(plan)?;
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn read_split_plan(path: &Path) -> AppResult<SplitPlan> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
