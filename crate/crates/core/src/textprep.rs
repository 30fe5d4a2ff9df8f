//! Noise reduction and normalization of email text.
//!
//! The pipeline is `strip_html -> tokenize -> drop short/numeric tokens ->
//! drop stop words -> drop noise words -> lemmatize`. Stop and noise filters
//! run again on the lemmas so that a lemma can never reintroduce a filtered
//! word (`subjects -> subject`).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

/// Bundled English stop list, one word per line.
pub const STOPWORDS_ASSET: &str = include_str!("../data/stopwords.txt");
/// Bundled lemma exception table: `form lemma` per line, `#` comments.
pub const LEMMA_EXCEPTIONS_ASSET: &str = include_str!("../data/lemma_exceptions.txt");
/// Words common to ham and spam alike in the Enron corpora.
pub const DEFAULT_NOISE_WORDS: [&str; 4] = ["subject", "cc", "to", "enron"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

/// On/off switches for each stage. All on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepFlags {
    pub strip_html: bool,
    pub remove_stopwords: bool,
    /// Also controls removal of single characters and purely numeric tokens.
    pub remove_noise_words: bool,
    pub lemmatize: bool,
}

impl Default for PrepFlags {
    fn default() -> Self {
        PrepFlags { strip_html: true, remove_stopwords: true, remove_noise_words: true, lemmatize: true }
    }
}

impl PrepFlags {
    pub fn all_off() -> Self {
        PrepFlags { strip_html: false, remove_stopwords: false, remove_noise_words: false, lemmatize: false }
    }
}

#[derive(Debug, Clone)]
pub struct PrepConfig {
    pub flags: PrepFlags,
    pub stop_list: BTreeSet<String>,
    pub noise_words: BTreeSet<String>,
    pub lemmatizer: Lemmatizer,
}

impl PrepConfig {
    /// Bundled stop list, default noise words and bundled lemma table.
    pub fn bundled(flags: PrepFlags) -> Self {
        PrepConfig {
            flags,
            stop_list: parse_word_list(STOPWORDS_ASSET),
            noise_words: DEFAULT_NOISE_WORDS.iter().map(|w| w.to_string()).collect(),
            lemmatizer: Lemmatizer::bundled(),
        }
    }
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig::bundled(PrepFlags::default())
    }
}

pub fn parse_word_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_lowercase())
        .collect()
}

const ENTITIES: [(&str, char); 5] =
    [("amp", '&'), ("lt", '<'), ("gt", '>'), ("quot", '"'), ("nbsp", '\u{a0}')];

/// Removes `<...>` tags and decodes the five common named entities.
///
/// A `<` only opens a tag when followed by a letter, `/`, `!` or `?` and a
/// closing `>` appears before the next `<`; otherwise it is literal text.
/// When a removed tag sat between two alphanumeric characters a single
/// space is kept so adjacent words do not fuse.
pub fn strip_html(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let rest = &raw[i..];
        let c = rest.chars().next().unwrap();
        if c == '<' {
            if let Some(len) = tag_length(rest) {
                let after = rest[len..].chars().next();
                let before = out.chars().next_back();
                if matches!(before, Some(b) if b.is_alphanumeric())
                    && matches!(after, Some(a) if a.is_alphanumeric())
                {
                    out.push(' ');
                }
                i += len;
                continue;
            }
        } else if c == '&' {
            if let Some((len, ch)) = entity_at(rest) {
                out.push(ch);
                i += len;
                continue;
            }
        }
        out.push(c);
        i += c.len_utf8();
    }
    out
}

fn tag_length(s: &str) -> Option<usize> {
    let mut chars = s.char_indices().skip(1);
    let (_, first) = chars.next()?;
    if !(first.is_ascii_alphabetic() || first == '/' || first == '!' || first == '?') {
        return None;
    }
    for (idx, ch) in chars {
        match ch {
            '>' => return Some(idx + 1),
            '<' => return None,
            _ => {}
        }
    }
    None
}

fn entity_at(s: &str) -> Option<(usize, char)> {
    let body = &s[1..];
    ENTITIES.iter().find_map(|(name, ch)| {
        let n = name.len();
        (body.len() > n && body.starts_with(name) && body.as_bytes()[n] == b';').then_some((n + 2, *ch))
    })
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase().filter(|l| l.is_alphanumeric()));
        } else if !current.is_empty() {
            tokens.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn is_numeric(token: &str) -> bool {
    token.chars().all(char::is_numeric)
}

/// Exception-table lookup followed by a single suffix rule.
///
/// A rule result is only accepted when it is itself a fixed point of the
/// lemmatizer; otherwise the token is returned unchanged. That makes
/// `lemmatize` idempotent by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lemmatizer {
    exceptions: BTreeMap<String, String>,
    lemmas: BTreeSet<String>,
}

impl Lemmatizer {
    pub fn bundled() -> Self {
        Self::from_table(LEMMA_EXCEPTIONS_ASSET).expect("bundled lemma table is valid")
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut exceptions = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(form), Some(lemma), None) => {
                    exceptions.insert(form.to_lowercase(), lemma.to_lowercase());
                }
                _ => {
                    return Err(Error::InvalidInput(format!("lemma table line {}: {line:?}", n + 1)));
                }
            }
        }
        let lemmas: BTreeSet<String> = exceptions.values().cloned().collect();
        for lemma in &lemmas {
            if let Some(other) = exceptions.get(lemma) {
                if other != lemma {
                    return Err(Error::InvalidInput(format!(
                        "lemma {lemma} is itself mapped to {other}"
                    )));
                }
            }
        }
        Ok(Lemmatizer { exceptions, lemmas })
    }

    pub fn lemmatize(&self, token: &str) -> String {
        if let Some(lemma) = self.exceptions.get(token) {
            return lemma.clone();
        }
        if self.lemmas.contains(token) {
            return token.to_string();
        }
        match suffix_rule(token) {
            Some(candidate) if self.is_fixed_point(&candidate) => candidate,
            _ => token.to_string(),
        }
    }

    fn is_fixed_point(&self, word: &str) -> bool {
        match self.exceptions.get(word) {
            Some(lemma) => lemma == word,
            None => self.lemmas.contains(word) || suffix_rule(word).is_none(),
        }
    }
}

const MIN_STEM: usize = 3;

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// Consonant/vowel classification where `y` after a consonant is a vowel.
fn vowel_mask(w: &[u8]) -> Vec<bool> {
    let mut mask: Vec<bool> = Vec::with_capacity(w.len());
    for (i, &c) in w.iter().enumerate() {
        let v = is_vowel(c) || (c == b'y' && i > 0 && !mask[i - 1]);
        mask.push(v);
    }
    mask
}

/// Number of vowel-consonant sequences.
fn measure(w: &[u8]) -> usize {
    let mask = vowel_mask(w);
    mask.windows(2).filter(|p| p[0] && !p[1]).count()
}

fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    if n < 3 {
        return false;
    }
    let mask = vowel_mask(w);
    !mask[n - 3] && mask[n - 2] && !mask[n - 1] && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

/// Restores a stem after `-ing`/`-ed` removal.
fn repair_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z') {
        return stem[..n - 1].to_string();
    }
    if stem.ends_with("at") || stem.ends_with("bl") || stem.ends_with("iz") {
        return format!("{stem}e");
    }
    if measure(b) == 1 && ends_cvc(b) {
        return format!("{stem}e");
    }
    stem.to_string()
}

fn suffix_rule(w: &str) -> Option<String> {
    if !w.is_ascii() {
        return None;
    }
    let accept = |s: String| (s.len() >= MIN_STEM).then_some(s);
    if let Some(stem) = w.strip_suffix("ies") {
        return accept(format!("{stem}y"));
    }
    if let Some(stem) = w.strip_suffix("sses") {
        return accept(format!("{stem}ss"));
    }
    for suffix in ["ing", "ed"] {
        if let Some(stem) = w.strip_suffix(suffix) {
            if suffix == "ed" && stem.ends_with('e') {
                return None;
            }
            if stem.len() < MIN_STEM || !vowel_mask(stem.as_bytes()).contains(&true) {
                return None;
            }
            return accept(repair_stem(stem));
        }
    }
    if let Some(stem) = w.strip_suffix('s') {
        if stem.ends_with('s') || stem.ends_with('u') || stem.ends_with('i') {
            return None;
        }
        return accept(stem.to_string());
    }
    None
}

/// Runs the full preparation pipeline on one document.
pub fn preprocess(doc: &Document, cfg: &PrepConfig) -> TokenStream {
    TokenStream { doc_id: doc.id.clone(), tokens: preprocess_text(&doc.raw_text, cfg) }
}

pub fn preprocess_text(text: &str, cfg: &PrepConfig) -> Vec<String> {
    let f = cfg.flags;
    let stripped;
    let text = if f.strip_html {
        stripped = strip_html(text);
        stripped.as_str()
    } else {
        text
    };
    let keep = |t: &str| {
        if f.remove_noise_words && (t.chars().count() < 2 || is_numeric(t) || cfg.noise_words.contains(t)) {
            return false;
        }
        !(f.remove_stopwords && cfg.stop_list.contains(t))
    };
    tokenize(text)
        .into_iter()
        .filter(|t| keep(t))
        .map(|t| if f.lemmatize { cfg.lemmatizer.lemmatize(&t) } else { t })
        .filter(|t| keep(t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn doc(text: &str) -> Document {
        Document {
            id: "d".into(),
            label: crate::corpus::Label::Ham,
            raw_text: text.into(),
            subset: "s".into(),
        }
    }

    #[test]
    fn strip_html_examples() {
        assert_eq!(strip_html("<b>win</b> cash"), "win cash");
        assert_eq!(strip_html("a &lt; b"), "a < b");
        assert_eq!(strip_html("price<"), "price<");
        assert_eq!(strip_html("a < b > c"), "a < b > c");
        assert_eq!(strip_html("&amp;&quot;&gt;&nbsp;"), "&\">\u{a0}");
        assert_eq!(strip_html("&lt;b&gt;"), "<b>");
        assert_eq!(strip_html("hello</p><p>world"), "hello world");
        assert_eq!(strip_html("&copy; x"), "&copy; x");
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Follow-up: 2 meetings!"), vec!["follow", "up", "2", "meetings"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("HTTP://x.y"), vec!["http", "x", "y"]);
        assert_eq!(tokenize("caf\u{e9}\u{fffd}ok"), vec!["caf\u{e9}", "ok"]);
    }

    #[test]
    fn lemmatize_examples() {
        let l = Lemmatizer::bundled();
        assert_eq!(l.lemmatize("following"), "follow");
        assert_eq!(l.lemmatize("impacted"), "impact");
        assert_eq!(l.lemmatize("gas"), "gas");
        assert_eq!(l.lemmatize("schedules"), "schedule");
        assert_eq!(l.lemmatize("meetings"), "meeting");
        assert_eq!(l.lemmatize("meeting"), "meeting");
        assert_eq!(l.lemmatize("policies"), "policy");
        assert_eq!(l.lemmatize("classes"), "class");
        assert_eq!(l.lemmatize("running"), "run");
        assert_eq!(l.lemmatize("making"), "make");
        assert_eq!(l.lemmatize("created"), "create");
        assert_eq!(l.lemmatize("children"), "child");
        assert_eq!(l.lemmatize("went"), "go");
        assert_eq!(l.lemmatize("please"), "please");
        assert_eq!(l.lemmatize("bonus"), "bonus");
        assert_eq!(l.lemmatize("speed"), "speed");
    }

    #[test]
    fn bundled_table_size_and_consistency() {
        let l = Lemmatizer::bundled();
        assert!(l.exceptions.len() >= 200);
        for lemma in &l.lemmas {
            assert_eq!(&l.lemmatize(lemma), lemma);
        }
        assert!(parse_word_list(STOPWORDS_ASSET).len() >= 150);
    }

    #[test]
    fn table_rejects_chained_lemmas() {
        assert!(Lemmatizer::from_table("went go\ngo goes\n").is_err());
        assert!(Lemmatizer::from_table("too many words\n").is_err());
    }

    #[test]
    fn preprocess_examples() {
        let cfg = PrepConfig::default();
        assert_eq!(preprocess(&doc("Subject: meeting schedules"), &cfg).tokens, vec!["meeting", "schedule"]);
        assert!(preprocess(&doc("<a>cc 7 x</a>"), &cfg).tokens.is_empty());
        let raw = PrepConfig::bundled(PrepFlags::all_off());
        assert_eq!(
            preprocess(&doc("Subject: <b>the</b> 7 x meetings"), &raw).tokens,
            vec!["subject", "b", "the", "b", "7", "x", "meetings"]
        );
    }

    #[test]
    fn lemma_cannot_reintroduce_noise() {
        let cfg = PrepConfig::default();
        assert!(preprocess(&doc("subjects"), &cfg).tokens.is_empty());
    }

    #[test]
    fn mixed_alphanumeric_kept() {
        let cfg = PrepConfig::default();
        assert_eq!(preprocess(&doc("win100 now 2024"), &cfg).tokens, vec!["win100"]);
    }

    proptest! {
        #[test]
        fn lemmatize_idempotent(w in "[a-z]{1,14}") {
            let l = Lemmatizer::bundled();
            let once = l.lemmatize(&w);
            prop_assert_eq!(l.lemmatize(&once), once);
        }

        #[test]
        fn lemmatize_idempotent_on_inflections(stem in "[a-z]{2,8}", suffix in "(ies|sses|ing|ed|s|ings|eds)") {
            let l = Lemmatizer::bundled();
            let once = l.lemmatize(&format!("{stem}{suffix}"));
            prop_assert_eq!(l.lemmatize(&once), once);
        }

        #[test]
        fn preprocess_output_respects_invariants(text in "\\PC{0,200}") {
            let cfg = PrepConfig::default();
            for t in preprocess(&doc(&text), &cfg).tokens {
                prop_assert!(t.chars().count() >= 2);
                prop_assert!(!is_numeric(&t));
                prop_assert!(!cfg.stop_list.contains(&t));
                prop_assert!(!cfg.noise_words.contains(&t));
                prop_assert!(t.chars().all(char::is_alphanumeric));
                prop_assert_eq!(t.to_lowercase(), t.clone());
            }
        }

        #[test]
        fn all_flags_off_keeps_every_alphanumeric_piece(text in "[a-zA-Z0-9 .,<>&;-]{0,80}") {
            let cfg = PrepConfig::bundled(PrepFlags::all_off());
            prop_assert_eq!(preprocess(&doc(&text), &cfg).tokens, tokenize(&text));
        }
    }
}
