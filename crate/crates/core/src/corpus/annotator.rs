//! Linguistic annotation interface plus a deterministic heuristic fallback.
//!
//! A real toolkit (CoreNLP-style) plugs in behind [`LinguisticAnnotator`];
//! the fallback keeps the whole pipeline runnable offline and makes test
//! output reproducible byte for byte.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnnotatorError {
    #[error("annotator failure: {0}")]
    Failure(String),
}

/// One token with char offsets into the full document text and
/// sentence-local dependency head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenAnnotation {
    pub start: usize,
    pub end: usize,
    pub pos: String,
    pub ner: String,
    pub dep_label: String,
    pub head: Option<usize>,
}

/// One sentence: char offsets into the full text plus its tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceAnnotation {
    pub start: usize,
    pub end: usize,
    pub tokens: Vec<TokenAnnotation>,
}

/// Sentence splitting, tokenization, POS, NER, and dependency annotation.
pub trait LinguisticAnnotator: Send + Sync {
    fn name(&self) -> &str;
    fn annotate(&self, text: &str) -> Result<Vec<SentenceAnnotation>, AnnotatorError>;
}

/// Deterministic heuristic annotator: rule-based sentence split and
/// tokenization, lexicon/suffix POS tags, shape-based NER tags, and a
/// path-shaped dependency tree rooted at the first main verb.
#[derive(Debug, Default, Clone)]
pub struct FallbackAnnotator;

const DETERMINERS: &[&str] = &["the", "a", "an", "this", "that", "these", "those", "no"];
const PREPOSITIONS: &[&str] = &[
    "of", "in", "on", "at", "by", "for", "with", "from", "to", "as", "into", "amid", "despite",
    "after", "before", "during", "over", "under", "against", "than", "since",
];
const CONJUNCTIONS: &[&str] = &["and", "or", "but"];
const PRONOUNS: &[&str] = &["it", "he", "she", "they", "we", "you", "i", "its", "their"];
const MODALS: &[&str] =
    &["will", "would", "could", "can", "may", "might", "should", "must", "shall"];
const NEGATIONS: &[&str] = &["not", "never", "n't", "nobody", "nothing", "neither"];
const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "has", "have", "had", "does", "do", "did",
];
const COMMON_VERBS: &[&str] = &[
    "fall", "falls", "fell", "fallen", "rise", "rises", "rose", "risen", "cut", "cuts", "say",
    "says", "said", "surge", "surged", "plunge", "plunged", "soar", "soared", "drop", "dropped",
    "climb", "climbed", "slip", "slipped", "ease", "eased", "deepen", "deepened", "hit", "grow",
    "grew", "jump", "jumped", "rally", "rallied", "export", "exports", "agree", "agreed",
    "refuse", "refused", "deny", "denied", "expect", "expected", "consider", "anticipate",
    "remain", "remained", "extend", "extended", "widen", "widened", "worsen", "worsened",
    "report", "reported", "doubt", "doubted", "gain", "gained", "lose", "lost", "trade",
    "traded", "settle", "settled",
];

impl FallbackAnnotator {
    fn pos_tag(lower: &str, surface: &str, sentence_initial: bool) -> String {
        let is_punct = surface.chars().all(|c| !c.is_alphanumeric());
        if is_punct {
            return ".".to_string();
        }
        if NEGATIONS.contains(&lower) {
            return "RB".to_string();
        }
        if MODALS.contains(&lower) {
            return "MD".to_string();
        }
        if AUXILIARIES.contains(&lower) {
            return "VB".to_string();
        }
        if DETERMINERS.contains(&lower) {
            return "DT".to_string();
        }
        if PREPOSITIONS.contains(&lower) {
            return "IN".to_string();
        }
        if CONJUNCTIONS.contains(&lower) {
            return "CC".to_string();
        }
        if PRONOUNS.contains(&lower) {
            return "PRP".to_string();
        }
        if surface.chars().any(|c| c.is_ascii_digit()) {
            return "CD".to_string();
        }
        if COMMON_VERBS.contains(&lower) {
            return "VB".to_string();
        }
        if lower.ends_with("ly") {
            return "RB".to_string();
        }
        if lower.ends_with("ing") {
            return "VBG".to_string();
        }
        if lower.ends_with("ed") {
            return "VBD".to_string();
        }
        if !sentence_initial && surface.chars().next().is_some_and(|c| c.is_uppercase()) {
            return "NNP".to_string();
        }
        "NN".to_string()
    }

    fn ner_tag(pos: &str, surface: &str) -> String {
        if pos == "CD" {
            "NUM".to_string()
        } else if pos == "NNP" || surface.chars().all(|c| c.is_uppercase() && c.is_alphabetic()) {
            "ENT".to_string()
        } else {
            "O".to_string()
        }
    }

    /// Root at the first main verb (VB*/auxiliary, not a modal); every other
    /// token attaches to its neighbor toward the root, forming a path.
    fn dependency(tags: &[String], lowers: &[String]) -> (Vec<Option<usize>>, Vec<String>) {
        let n = tags.len();
        let root = tags
            .iter()
            .position(|t| t.starts_with("VB"))
            .unwrap_or(0);
        let heads: Vec<Option<usize>> = (0..n)
            .map(|i| {
                if i == root {
                    None
                } else if i < root {
                    Some(i + 1)
                } else {
                    Some(i - 1)
                }
            })
            .collect();
        let mut labels = Vec::with_capacity(n);
        let mut subj_seen = false;
        let mut obj_seen = false;
        for i in 0..n {
            let tag = tags[i].as_str();
            let label = if i == root {
                "root"
            } else if tag == "." {
                "punct"
            } else if NEGATIONS.contains(&lowers[i].as_str()) {
                "neg"
            } else if tag == "MD" || (tag == "VB" && i < root) {
                "aux"
            } else if tag == "DT" {
                "det"
            } else if tag == "IN" {
                "case"
            } else if tag == "CC" {
                "cc"
            } else if tag == "CD" {
                "nummod"
            } else if tag.starts_with("NN") && i < root && !subj_seen {
                subj_seen = true;
                "nsubj"
            } else if tag.starts_with("NN") && i > root && !obj_seen {
                obj_seen = true;
                "dobj"
            } else if tag.starts_with("NN") {
                "nmod"
            } else {
                "dep"
            };
            labels.push(label.to_string());
        }
        (heads, labels)
    }
}

impl LinguisticAnnotator for FallbackAnnotator {
    fn name(&self) -> &str {
        "fallback-heuristic@v1"
    }

    fn annotate(&self, text: &str) -> Result<Vec<SentenceAnnotation>, AnnotatorError> {
        let chars: Vec<char> = text.chars().collect();
        let mut sentences = Vec::new();
        for (s_start, s_end) in split_sentences(&chars) {
            let raw_tokens = tokenize(&chars, s_start, s_end);
            if raw_tokens.is_empty() {
                continue;
            }
            let surfaces: Vec<String> = raw_tokens
                .iter()
                .map(|&(ts, te)| chars[ts..te].iter().collect())
                .collect();
            let lowers: Vec<String> = surfaces.iter().map(|s| s.to_lowercase()).collect();
            let tags: Vec<String> = surfaces
                .iter()
                .enumerate()
                .map(|(i, s)| Self::pos_tag(&lowers[i], s, i == 0))
                .collect();
            let (heads, dep_labels) = Self::dependency(&tags, &lowers);
            let tokens = raw_tokens
                .iter()
                .enumerate()
                .map(|(i, &(ts, te))| TokenAnnotation {
                    start: ts,
                    end: te,
                    pos: tags[i].clone(),
                    ner: Self::ner_tag(&tags[i], &surfaces[i]),
                    dep_label: dep_labels[i].clone(),
                    head: heads[i],
                })
                .collect();
            sentences.push(SentenceAnnotation { start: s_start, end: s_end, tokens });
        }
        Ok(sentences)
    }
}

/// Sentence boundaries: after `.`, `!`, `?` followed by whitespace, or at
/// blank lines. Returns char-offset ranges with surrounding space trimmed.
fn split_sentences(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let n = chars.len();
    let mut start = 0;
    let mut i = 0;
    while i < n {
        let c = chars[i];
        let boundary = matches!(c, '.' | '!' | '?')
            && (i + 1 >= n || chars[i + 1].is_whitespace());
        let paragraph = c == '\n' && i + 1 < n && chars[i + 1] == '\n';
        if boundary || paragraph || i + 1 == n {
            push_trimmed(chars, start, i + 1, &mut out);
            start = i + 1;
        }
        i += 1;
    }
    out
}

fn push_trimmed(chars: &[char], mut start: usize, mut end: usize, out: &mut Vec<(usize, usize)>) {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    if start < end {
        out.push((start, end));
    }
}

/// Whitespace split, then leading/trailing punctuation peeled into separate
/// tokens. Interior hyphens and decimal points stay in one token.
fn tokenize(chars: &[char], start: usize, end: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = start;
    while i < end {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < end && !chars[j].is_whitespace() {
            j += 1;
        }
        // peel leading punctuation
        let mut a = i;
        while a < j && is_peel_punct(chars[a]) {
            out.push((a, a + 1));
            a += 1;
        }
        // peel trailing punctuation
        let mut b = j;
        let mut trailing = Vec::new();
        while b > a && is_peel_punct(chars[b - 1]) {
            trailing.push((b - 1, b));
            b -= 1;
        }
        if a < b {
            out.push((a, b));
        }
        trailing.reverse();
        out.extend(trailing);
        i = j;
    }
    out
}

fn is_peel_punct(c: char) -> bool {
    matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | '"' | '\'' | '(' | ')' | '[' | ']' | '%')
}
