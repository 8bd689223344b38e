//! Loaders for the cross-domain source corpora used by sequential transfer.
//!
//! Each corpus ships in a different native layout; the loaders normalize to
//! [`SourceSentenceSet`]. Cue-annotated corpora arrive token-per-line with
//! cue flag columns, class-labeled corpora as TSV or JSON lines:
//!
//! * `ConanDoyle`, `Socc` — `token<TAB>flag`, flag in `{O, CUE, SCOPE}`
//!   (negation); blank line between sentences.
//! * `WikipediaConll` — same layout, flags mark uncertainty cues.
//! * `Reviews` — `token<TAB>neg-flag<TAB>unc-flag` (both phenomena).
//! * `TenKFin` — `label<TAB>sentence`, label in `{certain, uncertain}`.
//! * `Sentivent` — JSON lines `{"text": ..., "negated": bool, "uncertain": bool}`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("unsupported format for {kind:?}: {why}")]
    UnsupportedFormat { kind: SourceKind, why: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// The six source corpora with negation and/or uncertainty annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceKind {
    ConanDoyle,
    Socc,
    TenKFin,
    WikipediaConll,
    Reviews,
    Sentivent,
}

impl SourceKind {
    pub const ALL: [SourceKind; 6] = [
        SourceKind::ConanDoyle,
        SourceKind::Socc,
        SourceKind::TenKFin,
        SourceKind::WikipediaConll,
        SourceKind::Reviews,
        SourceKind::Sentivent,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::ConanDoyle => "conan-doyle",
            SourceKind::Socc => "socc",
            SourceKind::TenKFin => "10k-fin",
            SourceKind::WikipediaConll => "wikipedia-conll",
            SourceKind::Reviews => "reviews",
            SourceKind::Sentivent => "sentivent",
        }
    }

    pub fn parse(name: &str) -> Option<SourceKind> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// True when the corpus annotates negation (cue spans or class label).
    pub fn has_negation(&self) -> bool {
        matches!(
            self,
            SourceKind::ConanDoyle | SourceKind::Socc | SourceKind::Reviews | SourceKind::Sentivent
        )
    }

    /// True when the corpus annotates uncertainty.
    pub fn has_uncertainty(&self) -> bool {
        matches!(
            self,
            SourceKind::TenKFin
                | SourceKind::WikipediaConll
                | SourceKind::Reviews
                | SourceKind::Sentivent
        )
    }
}

/// One source sentence. Cue fields are `Some` when the corpus annotates the
/// phenomenon at cue level (an empty vector means "annotated, no cue");
/// label fields are `Some` when only sentence-level class labels exist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSentence {
    pub text: String,
    pub negation_cues: Option<Vec<(usize, usize)>>,
    pub uncertainty_cues: Option<Vec<(usize, usize)>>,
    pub negation_label: Option<bool>,
    pub uncertainty_label: Option<bool>,
}

impl SourceSentence {
    fn plain(text: String) -> Self {
        SourceSentence {
            text,
            negation_cues: None,
            uncertainty_cues: None,
            negation_label: None,
            uncertainty_label: None,
        }
    }

    /// Negation present, when the corpus can tell.
    pub fn is_negated(&self) -> Option<bool> {
        if let Some(cues) = &self.negation_cues {
            return Some(!cues.is_empty());
        }
        self.negation_label
    }

    /// Uncertainty present, when the corpus can tell.
    pub fn is_uncertain(&self) -> Option<bool> {
        if let Some(cues) = &self.uncertainty_cues {
            return Some(!cues.is_empty());
        }
        self.uncertainty_label
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSentenceSet {
    pub kind: SourceKind,
    pub sentences: Vec<SourceSentence>,
}

/// Loads a source corpus from its native layout.
pub fn load_source_dataset(kind: SourceKind, path: &Path) -> Result<SourceSentenceSet, SourceError> {
    let raw = std::fs::read_to_string(path)?;
    parse_source_dataset(kind, &raw)
}

/// Format-level parser behind [`load_source_dataset`], usable on in-memory
/// fixtures.
pub fn parse_source_dataset(kind: SourceKind, raw: &str) -> Result<SourceSentenceSet, SourceError> {
    let sentences = match kind {
        SourceKind::ConanDoyle | SourceKind::Socc => parse_cue_column(kind, raw, CueTarget::Negation)?,
        SourceKind::WikipediaConll => parse_cue_column(kind, raw, CueTarget::Uncertainty)?,
        SourceKind::Reviews => parse_two_cue_columns(kind, raw)?,
        SourceKind::TenKFin => parse_labeled_tsv(kind, raw)?,
        SourceKind::Sentivent => parse_jsonl(kind, raw)?,
    };
    if sentences.is_empty() {
        return Err(SourceError::EmptyDataset);
    }
    Ok(SourceSentenceSet { kind, sentences })
}

enum CueTarget {
    Negation,
    Uncertainty,
}

fn parse_flag(kind: SourceKind, raw: &str) -> Result<bool, SourceError> {
    match raw {
        "CUE" => Ok(true),
        "O" | "SCOPE" => Ok(false),
        other => Err(SourceError::UnsupportedFormat {
            kind,
            why: format!("unknown cue flag {other:?}"),
        }),
    }
}

/// Token-per-line with one cue flag column, blank line between sentences.
fn parse_cue_column(
    kind: SourceKind,
    raw: &str,
    target: CueTarget,
) -> Result<Vec<SourceSentence>, SourceError> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<(String, bool)> = Vec::new();
    let mut flush = |tokens: &mut Vec<(String, bool)>| {
        if tokens.is_empty() {
            return;
        }
        let mut text = String::new();
        let mut cues = Vec::new();
        for (i, (tok, is_cue)) in tokens.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            let start = text.chars().count();
            text.push_str(tok);
            if *is_cue {
                cues.push((start, text.chars().count()));
            }
        }
        let mut sentence = SourceSentence::plain(text);
        match target {
            CueTarget::Negation => sentence.negation_cues = Some(cues),
            CueTarget::Uncertainty => sentence.uncertainty_cues = Some(cues),
        }
        sentences.push(sentence);
        tokens.clear();
    };
    for line in raw.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens);
            continue;
        }
        let (token, flag) = line.split_once('\t').ok_or_else(|| {
            SourceError::UnsupportedFormat { kind, why: "expected token<TAB>flag".to_string() }
        })?;
        tokens.push((token.to_string(), parse_flag(kind, flag.trim())?));
    }
    flush(&mut tokens);
    Ok(sentences)
}

/// Token-per-line with negation and uncertainty flag columns.
fn parse_two_cue_columns(kind: SourceKind, raw: &str) -> Result<Vec<SourceSentence>, SourceError> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<(String, bool, bool)> = Vec::new();
    let mut flush = |tokens: &mut Vec<(String, bool, bool)>| {
        if tokens.is_empty() {
            return;
        }
        let mut text = String::new();
        let mut neg = Vec::new();
        let mut unc = Vec::new();
        for (i, (tok, n, u)) in tokens.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            let start = text.chars().count();
            text.push_str(tok);
            let end = text.chars().count();
            if *n {
                neg.push((start, end));
            }
            if *u {
                unc.push((start, end));
            }
        }
        let mut sentence = SourceSentence::plain(text);
        sentence.negation_cues = Some(neg);
        sentence.uncertainty_cues = Some(unc);
        sentences.push(sentence);
        tokens.clear();
    };
    for line in raw.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens);
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(SourceError::UnsupportedFormat {
                kind,
                why: "expected token<TAB>neg-flag<TAB>unc-flag".to_string(),
            });
        }
        tokens.push((
            fields[0].to_string(),
            parse_flag(kind, fields[1].trim())?,
            parse_flag(kind, fields[2].trim())?,
        ));
    }
    flush(&mut tokens);
    Ok(sentences)
}

/// `certain|uncertain<TAB>sentence` per line.
fn parse_labeled_tsv(kind: SourceKind, raw: &str) -> Result<Vec<SourceSentence>, SourceError> {
    let mut sentences = Vec::new();
    for line in raw.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line.split_once('\t').ok_or_else(|| {
            SourceError::UnsupportedFormat { kind, why: "expected label<TAB>sentence".to_string() }
        })?;
        let uncertain = match label.trim().to_lowercase().as_str() {
            "uncertain" => true,
            "certain" => false,
            other => {
                return Err(SourceError::UnsupportedFormat {
                    kind,
                    why: format!("unknown label {other:?}"),
                })
            }
        };
        let mut sentence = SourceSentence::plain(text.to_string());
        sentence.uncertainty_label = Some(uncertain);
        sentences.push(sentence);
    }
    Ok(sentences)
}

#[derive(Deserialize)]
struct SentiventRow {
    text: String,
    negated: bool,
    uncertain: bool,
}

/// JSON lines with sentence-level class labels for both phenomena.
fn parse_jsonl(kind: SourceKind, raw: &str) -> Result<Vec<SourceSentence>, SourceError> {
    let mut sentences = Vec::new();
    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: SentiventRow = serde_json::from_str(line).map_err(|e| {
            SourceError::UnsupportedFormat { kind, why: format!("bad JSON line: {e}") }
        })?;
        let mut sentence = SourceSentence::plain(row.text);
        sentence.negation_label = Some(row.negated);
        sentence.uncertainty_label = Some(row.uncertain);
        sentences.push(sentence);
    }
    Ok(sentences)
}
