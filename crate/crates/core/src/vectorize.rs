//! Top-N dictionary and bag-of-words count matrices.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::textprep::TokenStream;

pub const DEFAULT_DICT_SIZE: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "DictionaryEntries", into = "DictionaryEntries")]
pub struct Dictionary {
    entries: Vec<(String, u64)>,
    index: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct DictionaryEntries {
    entries: Vec<(String, u64)>,
}

impl From<DictionaryEntries> for Dictionary {
    fn from(d: DictionaryEntries) -> Self {
        Dictionary::from_entries(d.entries)
    }
}

impl From<Dictionary> for DictionaryEntries {
    fn from(d: Dictionary) -> Self {
        DictionaryEntries { entries: d.entries }
    }
}

impl Dictionary {
    /// Uses `entries` in the given order as columns.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Self {
        let index = entries.iter().enumerate().map(|(i, (w, _))| (w.clone(), i)).collect();
        Dictionary { entries, index }
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn column(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, column: usize) -> &str {
        &self.entries[column].0
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(w, _)| w.as_str())
    }

    /// Hex SHA-256 (first 16 bytes) of the newline-joined column words.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (w, _) in &self.entries {
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        let digest = h.finalize();
        let mut s = String::with_capacity(32);
        for b in &digest[..16] {
            let _ = write!(s, "{b:02x}");
        }
        s
    }
}

/// Keeps the `size` most frequent words across `streams`.
///
/// Ties in frequency are broken by ascending word.
pub fn build_dictionary(streams: &[TokenStream], size: usize) -> Result<Dictionary> {
    build_dictionary_iter(streams.iter(), size)
}

/// Like [`build_dictionary`] but only counts streams whose id is in
/// `train_ids`, so held-out documents can never shape the feature space.
pub fn build_dictionary_from_train(
    streams: &[TokenStream],
    train_ids: &BTreeSet<&str>,
    size: usize,
) -> Result<Dictionary> {
    build_dictionary_iter(streams.iter().filter(|s| train_ids.contains(s.doc_id.as_str())), size)
}

/// Like [`build_dictionary`] over any sequence of streams.
pub fn build_dictionary_iter<'a>(
    streams: impl Iterator<Item = &'a TokenStream>,
    size: usize,
) -> Result<Dictionary> {
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    for s in streams {
        for t in &s.tokens {
            *freq.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    if freq.is_empty() || size == 0 {
        return Err(Error::EmptyDictionary);
    }
    let mut entries: Vec<(String, u64)> = freq.into_iter().map(|(w, c)| (String::from(w), c)).collect();
    // BTreeMap iteration is already word-ascending, so a stable sort on
    // frequency keeps the lexicographic tie-break.
    entries.sort_by_key(|e| core::cmp::Reverse(e.1));
    entries.truncate(size);
    Ok(Dictionary::from_entries(entries))
}

/// Count vector of `stream` over the dictionary columns.
pub fn vectorize(stream: &TokenStream, dict: &Dictionary) -> Vec<f64> {
    let mut v = alloc::vec![0.0; dict.len()];
    for t in &stream.tokens {
        if let Some(j) = dict.column(t) {
            v[j] += 1.0;
        }
    }
    v
}

/// Dense row-major document-by-word count matrix with labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub n_features: usize,
    pub data: Vec<f64>,
    pub labels: Vec<Label>,
    pub fingerprint: String,
}

impl FeatureMatrix {
    pub fn from_streams(streams: &[&TokenStream], labels: &[Label], dict: &Dictionary) -> Result<Self> {
        if streams.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: streams.len(), found: labels.len() });
        }
        let mut data = Vec::with_capacity(streams.len() * dict.len());
        for s in streams {
            data.extend(vectorize(s, dict));
        }
        Ok(FeatureMatrix {
            ids: streams.iter().map(|s| s.doc_id.clone()).collect(),
            n_features: dict.len(),
            data,
            labels: labels.to_vec(),
            fingerprint: dict.fingerprint(),
        })
    }

    /// Builds a matrix from explicit rows; ids are the row positions.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[Label], fingerprint: &str) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), found: labels.len() });
        }
        let mut data = Vec::with_capacity(rows.len() * n_features);
        for r in rows {
            if r.len() != n_features {
                return Err(Error::DimensionMismatch { expected: n_features, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(FeatureMatrix {
            ids: (0..rows.len()).map(|i| alloc::format!("{i}")).collect(),
            n_features,
            data,
            labels: labels.to_vec(),
            fingerprint: fingerprint.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    /// Rows selected by position, in the given order.
    pub fn select(&self, positions: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(positions.len() * self.n_features);
        for &p in positions {
            data.extend_from_slice(self.row(p));
        }
        FeatureMatrix {
            ids: positions.iter().map(|&p| self.ids[p].clone()).collect(),
            n_features: self.n_features,
            data,
            labels: positions.iter().map(|&p| self.labels[p]).collect(),
            fingerprint: self.fingerprint.clone(),
        }
    }

    pub fn class_count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}
