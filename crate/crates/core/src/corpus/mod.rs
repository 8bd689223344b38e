//! Corpus ingest: brat standoff to the canonical document model, linguistic
//! annotation, and the cross-domain source-dataset loaders.
//!
//! Canonical JSON layout (UTF-8, token indices 0-based, `end_tok` inclusive,
//! `head` null for the dependency root):
//!
//! ```json
//! {"doc_id": "...", "sentences": [{
//!     "tokens": [{"surface": "...", "pos": "...", "ner": "...", "dep_label": "...", "head": 0}],
//!     "entities": [{"type": "...", "start_tok": 0, "end_tok": 0}],
//!     "triggers": [{"type": "...", "start_tok": 0, "end_tok": 0,
//!                   "polarity": "POSITIVE", "modality": "ASSERTED", "intensity": "NEUTRAL"}],
//!     "arguments": [{"trigger_idx": 0, "entity_idx": 0, "role": "..."}]}]}
//! ```

pub mod annotator;
pub mod sources;
pub mod standoff;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::DepTree;
use crate::model::{
    normalize_label, EventProperties, EventRecord, Intensity, Modality, Polarity, TypedSpan,
};
use annotator::{AnnotatorError, LinguisticAnnotator};
use standoff::RawStandoffDoc;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("annotator failure: {0}")]
    AnnotatorFailure(#[from] AnnotatorError),
    #[error("gold span {0:?} cannot be aligned to tokens")]
    UnalignableSpan(String),
    #[error("document {doc_id} sentence {sentence}: {why}")]
    InvalidDocument { doc_id: String, sentence: usize, why: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub pos: String,
    pub ner: String,
    pub dep_label: String,
    pub head: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    #[serde(rename = "type")]
    pub entity_type: String,
    pub start_tok: usize,
    pub end_tok: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    #[serde(rename = "type")]
    pub event_type: String,
    pub start_tok: usize,
    pub end_tok: usize,
    pub polarity: Polarity,
    pub modality: Modality,
    pub intensity: Intensity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentLink {
    pub trigger_idx: usize,
    pub entity_idx: usize,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub entities: Vec<Mention>,
    pub triggers: Vec<Trigger>,
    pub arguments: Vec<ArgumentLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
}

/// A set of documents, the unit the CLI reads and writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Trigger {
    pub fn span(&self) -> TypedSpan {
        TypedSpan::new(self.start_tok, self.end_tok, self.event_type.clone())
    }

    pub fn properties(&self) -> EventProperties {
        EventProperties {
            polarity: self.polarity,
            modality: self.modality,
            intensity: self.intensity,
        }
    }
}

impl Mention {
    pub fn span(&self) -> TypedSpan {
        TypedSpan::new(self.start_tok, self.end_tok, self.entity_type.clone())
    }
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.surface.clone()).collect()
    }

    pub fn text(&self) -> String {
        self.surfaces().join(" ")
    }

    /// The dependency tree, rebuilt from token heads and labels.
    pub fn dep_tree(&self) -> Result<DepTree, crate::graph::GraphError> {
        DepTree::new(
            self.tokens.iter().map(|t| t.head).collect(),
            self.tokens.iter().map(|t| t.dep_label.clone()).collect(),
        )
    }

    pub fn entity_spans(&self) -> Vec<TypedSpan> {
        self.entities.iter().map(Mention::span).collect()
    }

    pub fn trigger_spans(&self) -> Vec<TypedSpan> {
        self.triggers.iter().map(Trigger::span).collect()
    }

    /// Gold events as validation-ready records.
    pub fn event_records(&self) -> Vec<EventRecord> {
        self.triggers
            .iter()
            .enumerate()
            .map(|(ti, trig)| EventRecord {
                trigger: trig.span(),
                arguments: self
                    .arguments
                    .iter()
                    .filter(|a| a.trigger_idx == ti)
                    .map(|a| (self.entities[a.entity_idx].span(), a.role.clone()))
                    .collect(),
                properties: trig.properties(),
            })
            .collect()
    }

    fn validate(&self) -> Result<(), String> {
        let n = self.tokens.len();
        if n == 0 {
            return Err("sentence has no tokens".to_string());
        }
        for m in &self.entities {
            if m.start_tok > m.end_tok || m.end_tok >= n {
                return Err(format!("entity span {}..{} out of range", m.start_tok, m.end_tok));
            }
        }
        for t in &self.triggers {
            if t.start_tok > t.end_tok || t.end_tok >= n {
                return Err(format!("trigger span {}..{} out of range", t.start_tok, t.end_tok));
            }
        }
        for a in &self.arguments {
            if a.trigger_idx >= self.triggers.len() || a.entity_idx >= self.entities.len() {
                return Err(format!(
                    "argument ({}, {}) references missing structure",
                    a.trigger_idx, a.entity_idx
                ));
            }
        }
        self.dep_tree().map_err(|e| e.to_string())?;
        Ok(())
    }
}

impl Document {
    pub fn n_sentences(&self) -> usize {
        self.sentences.len()
    }

    pub fn n_events(&self) -> usize {
        self.sentences.iter().map(|s| s.triggers.len()).sum()
    }

    pub fn n_arguments(&self) -> usize {
        self.sentences.iter().map(|s| s.arguments.len()).sum()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for (i, sentence) in self.sentences.iter().enumerate() {
            sentence.validate().map_err(|why| CorpusError::InvalidDocument {
                doc_id: self.doc_id.clone(),
                sentence: i,
                why,
            })?;
        }
        Ok(())
    }
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Corpus { documents }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("corpus serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self, CorpusError> {
        let corpus: Corpus = serde_json::from_str(json)?;
        for doc in &corpus.documents {
            doc.validate()?;
        }
        Ok(corpus)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CorpusError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.documents.iter().flat_map(|d| d.sentences.iter())
    }

    pub fn n_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn n_sentences(&self) -> usize {
        self.documents.iter().map(Document::n_sentences).sum()
    }

    pub fn n_events(&self) -> usize {
        self.documents.iter().map(Document::n_events).sum()
    }

    pub fn n_arguments(&self) -> usize {
        self.documents.iter().map(Document::n_arguments).sum()
    }
}

/// Snaps a character span onto token indices, growing outward so that every
/// gold character stays covered. Returns an inclusive token range.
pub fn snap_to_tokens(
    token_ranges: &[(usize, usize)],
    span_start: usize,
    span_end: usize,
) -> Option<(usize, usize)> {
    let mut first = None;
    let mut last = None;
    for (i, &(ts, te)) in token_ranges.iter().enumerate() {
        if ts < span_end && span_start < te {
            if first.is_none() {
                first = Some(i);
            }
            last = Some(i);
        }
    }
    Some((first?, last?))
}

/// Converts a parsed standoff document into the canonical model, attaching
/// linguistic annotation and re-anchoring gold spans to token indices.
pub fn to_canonical(
    raw: &RawStandoffDoc,
    annotator: &dyn LinguisticAnnotator,
) -> Result<Document, CorpusError> {
    let ann_sentences = annotator.annotate(&raw.text)?;
    let chars: Vec<char> = raw.text.chars().collect();

    // Sentence char spans must be ordered and disjoint.
    for pair in ann_sentences.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(CorpusError::AnnotatorFailure(AnnotatorError::Failure(
                "sentence spans overlap or are out of order".to_string(),
            )));
        }
    }

    let mut sentences: Vec<Sentence> = Vec::with_capacity(ann_sentences.len());
    let mut token_ranges: Vec<Vec<(usize, usize)>> = Vec::with_capacity(ann_sentences.len());
    for ann in &ann_sentences {
        let n = ann.tokens.len();
        let heads: Vec<Option<usize>> = ann.tokens.iter().map(|t| t.head).collect();
        let labels: Vec<String> = ann.tokens.iter().map(|t| t.dep_label.clone()).collect();
        // Sentences with a broken parse keep a degenerate right-branching
        // tree rather than being dropped, so event counts survive.
        let (heads, labels) = match DepTree::new(heads.clone(), labels.clone()) {
            Ok(_) => (heads, labels),
            Err(e) => {
                log::warn!("{}: replacing invalid dependency parse ({e})", raw.doc_id);
                let rb: Vec<Option<usize>> =
                    (0..n).map(|i| if i == 0 { None } else { Some(i - 1) }).collect();
                (rb, vec!["dep".to_string(); n])
            }
        };
        let tokens: Vec<Token> = ann
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| Token {
                surface: chars[t.start..t.end].iter().collect(),
                pos: t.pos.clone(),
                ner: t.ner.clone(),
                dep_label: labels[i].clone(),
                head: heads[i],
            })
            .collect();
        token_ranges.push(ann.tokens.iter().map(|t| (t.start, t.end)).collect());
        sentences.push(Sentence {
            tokens,
            entities: Vec::new(),
            triggers: Vec::new(),
            arguments: Vec::new(),
        });
    }

    // Locate the sentence containing a char span; the span must not cross a
    // sentence boundary.
    let locate = |id: &str, start: usize, end: usize| -> Result<usize, CorpusError> {
        for (i, ann) in ann_sentences.iter().enumerate() {
            if start >= ann.start && start < ann.end {
                if end > ann.end {
                    return Err(CorpusError::UnalignableSpan(id.to_string()));
                }
                return Ok(i);
            }
        }
        Err(CorpusError::UnalignableSpan(id.to_string()))
    };

    let trigger_ids: std::collections::BTreeSet<&str> =
        raw.events.iter().map(|e| e.trigger.as_str()).collect();

    // Entities: every T not used as an event trigger.
    let mut entity_index: std::collections::BTreeMap<&str, (usize, usize)> =
        std::collections::BTreeMap::new();
    for tb in &raw.mentions {
        if trigger_ids.contains(tb.id.as_str()) {
            continue;
        }
        let si = locate(&tb.id, tb.start, tb.end)?;
        let (start_tok, end_tok) = snap_to_tokens(&token_ranges[si], tb.start, tb.end)
            .ok_or_else(|| CorpusError::UnalignableSpan(tb.id.clone()))?;
        entity_index.insert(&tb.id, (si, sentences[si].entities.len()));
        sentences[si].entities.push(Mention {
            entity_type: normalize_label(&tb.ty),
            start_tok,
            end_tok,
        });
    }

    // Events: one trigger per E record, with property attributes applied.
    for ev in &raw.events {
        let tb = raw.mention(&ev.trigger).expect("validated reference");
        let si = locate(&ev.id, tb.start, tb.end)?;
        let (start_tok, end_tok) = snap_to_tokens(&token_ranges[si], tb.start, tb.end)
            .ok_or_else(|| CorpusError::UnalignableSpan(ev.id.clone()))?;
        let mut props = EventProperties::default();
        for attr in raw.attributes.iter().filter(|a| a.target == ev.id) {
            match normalize_label(&attr.name).as_str() {
                "POLARITY" => match Polarity::parse(&attr.value) {
                    Some(v) => props.polarity = v,
                    None => log::warn!("{}: bad polarity value {:?}", raw.doc_id, attr.value),
                },
                "MODALITY" => match Modality::parse(&attr.value) {
                    Some(v) => props.modality = v,
                    None => log::warn!("{}: bad modality value {:?}", raw.doc_id, attr.value),
                },
                "INTENSITY" => match Intensity::parse(&attr.value) {
                    Some(v) => props.intensity = v,
                    None => log::warn!("{}: bad intensity value {:?}", raw.doc_id, attr.value),
                },
                other => log::warn!("{}: unknown attribute {:?}", raw.doc_id, other),
            }
        }
        let trigger_idx = sentences[si].triggers.len();
        sentences[si].triggers.push(Trigger {
            event_type: normalize_label(&ev.ty),
            start_tok,
            end_tok,
            polarity: props.polarity,
            modality: props.modality,
            intensity: props.intensity,
        });
        for (role, target) in &ev.args {
            match entity_index.get(target.as_str()) {
                Some(&(esi, entity_idx)) if esi == si => {
                    sentences[si].arguments.push(ArgumentLink {
                        trigger_idx,
                        entity_idx,
                        role: normalize_label(role),
                    });
                }
                Some(_) => log::warn!(
                    "{}: dropping cross-sentence argument {} of {}",
                    raw.doc_id,
                    target,
                    ev.id
                ),
                None => log::warn!(
                    "{}: dropping argument {} of {} (target is itself a trigger)",
                    raw.doc_id,
                    target,
                    ev.id
                ),
            }
        }
    }

    let doc = Document { doc_id: raw.doc_id.clone(), sentences };
    doc.validate()?;
    Ok(doc)
}
