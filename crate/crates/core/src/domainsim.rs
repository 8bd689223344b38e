//! Source/target domain similarity via top-vocabulary overlap: profiles hold
//! the n most frequent non-stopword word types of a corpus, and similarity
//! is the percentage of the source profile found in the target profile.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainSimError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("profiles are incomparable: {0}")]
    ProfileMismatch(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Versioned stopword list; its hash keys cached profiles so editing the
/// list invalidates them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    pub id: String,
    words: std::collections::BTreeSet<String>,
}

static DEFAULT_STOPWORDS: &str = include_str!("../assets/stopwords_en.txt");

impl StopwordList {
    pub fn from_text(text: &str) -> Self {
        let words: std::collections::BTreeSet<String> = text
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let joined: Vec<&str> = words.iter().map(String::as_str).collect();
        let hash = Sha256::digest(joined.join("\n").as_bytes());
        let id: String = hash.iter().take(6).map(|b| format!("{b:02x}")).collect();
        StopwordList { id, words }
    }

    /// The shipped English list.
    pub fn default_english() -> Self {
        Self::from_text(DEFAULT_STOPWORDS)
    }

    pub fn load(path: &Path) -> Result<Self, DomainSimError> {
        Ok(Self::from_text(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Top-n vocabulary of one corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabProfile {
    pub corpus_id: String,
    pub n: usize,
    pub token_count: u64,
    pub stopword_list_id: String,
    pub words: Vec<String>,
}

impl VocabProfile {
    pub fn word_set(&self) -> std::collections::BTreeSet<&str> {
        self.words.iter().map(String::as_str).collect()
    }
}

/// Builds the profile: the `n` most frequent lowercased non-stopword types,
/// frequency ties broken lexicographically.
pub fn top_vocab(
    corpus_id: &str,
    tokens: impl Iterator<Item = String>,
    n: usize,
    stopwords: &StopwordList,
) -> Result<VocabProfile, DomainSimError> {
    assert!(n > 0, "profile size must be positive");
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut token_count = 0u64;
    for token in tokens {
        token_count += 1;
        let lower = token.to_lowercase();
        if lower.is_empty() || stopwords.contains(&lower) {
            continue;
        }
        *counts.entry(lower).or_insert(0) += 1;
    }
    if token_count == 0 {
        return Err(DomainSimError::EmptyCorpus);
    }
    // Descending frequency; the BTreeMap iteration order makes the
    // lexicographic tie-break free.
    let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    entries.truncate(n);
    let mut words: Vec<String> = entries.into_iter().map(|(w, _)| w).collect();
    words.sort();
    Ok(VocabProfile {
        corpus_id: corpus_id.to_string(),
        n,
        token_count,
        stopword_list_id: stopwords.id.clone(),
        words,
    })
}

/// Overlap percentage `100 * |source /\ target| / |source|`. Symmetric when
/// both profiles are full (|a| = |b| = n).
pub fn overlap_pct(source: &VocabProfile, target: &VocabProfile) -> Result<f64, DomainSimError> {
    if source.n != target.n {
        return Err(DomainSimError::ProfileMismatch(format!(
            "profile sizes differ: {} vs {}",
            source.n, target.n
        )));
    }
    if source.stopword_list_id != target.stopword_list_id {
        return Err(DomainSimError::ProfileMismatch(
            "profiles built with different stopword lists".to_string(),
        ));
    }
    if source.words.is_empty() {
        return Err(DomainSimError::ProfileMismatch("source profile is empty".to_string()));
    }
    let target_set = target.word_set();
    let shared = source.words.iter().filter(|w| target_set.contains(w.as_str())).count();
    Ok(100.0 * shared as f64 / source.words.len() as f64)
}

/// Sources ranked by overlap with a fixed target, descending; ties break on
/// corpus id so the order is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRanking {
    pub target_id: String,
    pub entries: Vec<(String, f64)>,
}

pub fn rank_sources(
    target: &VocabProfile,
    sources: &[VocabProfile],
) -> Result<SimilarityRanking, DomainSimError> {
    let mut entries = Vec::with_capacity(sources.len());
    for source in sources {
        entries.push((source.corpus_id.clone(), overlap_pct(source, target)?));
    }
    entries.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0))
    });
    Ok(SimilarityRanking { target_id: target.corpus_id.clone(), entries })
}

/// Cache path for a profile: keyed by corpus content hash, n, and stopword
/// list id.
pub fn cache_path(dir: &Path, corpus_hash: &str, n: usize, stopword_id: &str) -> PathBuf {
    dir.join(format!("profile-{corpus_hash}-{n}-{stopword_id}.json"))
}

pub fn corpus_hash(raw: &str) -> String {
    let hash = Sha256::digest(raw.as_bytes());
    hash.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

pub fn save_profile(path: &Path, profile: &VocabProfile) -> Result<(), DomainSimError> {
    std::fs::write(path, serde_json::to_string_pretty(profile)?)?;
    Ok(())
}

pub fn load_profile(path: &Path) -> Result<VocabProfile, DomainSimError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
