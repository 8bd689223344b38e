//! BIO tag codec for span extraction tasks.
//!
//! Encoding is strict (overlapping spans are an error); decoding is total and
//! repairs ill-formed model output: an `I-X` with no open `X` span acts as
//! `B-X`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Token span with inclusive end and a type label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypedSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl TypedSpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        TypedSpan { start, end, label: label.into() }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false // inclusive-end spans always cover at least one token
    }

    pub fn overlaps(&self, other: &TypedSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// One BIO tag: `O`, `B-<label>`, or `I-<label>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BioTag {
    O,
    B(String),
    I(String),
}

impl BioTag {
    pub fn label(&self) -> Option<&str> {
        match self {
            BioTag::O => None,
            BioTag::B(l) | BioTag::I(l) => Some(l),
        }
    }
}

impl std::fmt::Display for BioTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BioTag::O => write!(f, "O"),
            BioTag::B(l) => write!(f, "B-{l}"),
            BioTag::I(l) => write!(f, "I-{l}"),
        }
    }
}

impl std::str::FromStr for BioTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            Ok(BioTag::O)
        } else if let Some(l) = s.strip_prefix("B-") {
            Ok(BioTag::B(l.to_string()))
        } else if let Some(l) = s.strip_prefix("I-") {
            Ok(BioTag::I(l.to_string()))
        } else {
            Err(format!("not a BIO tag: {s:?}"))
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BioError {
    #[error("spans {0:?} and {1:?} overlap")]
    OverlappingSpans(TypedSpan, TypedSpan),
    #[error("span {0:?} exceeds sequence length {1}")]
    SpanOutOfRange(TypedSpan, usize),
}

/// Encodes typed spans as a BIO sequence over `n_tokens` tokens.
pub fn encode_bio(spans: &[TypedSpan], n_tokens: usize) -> Result<Vec<BioTag>, BioError> {
    let mut sorted: Vec<&TypedSpan> = spans.iter().collect();
    sorted.sort();
    for pair in sorted.windows(2) {
        if pair[0].overlaps(pair[1]) {
            return Err(BioError::OverlappingSpans(pair[0].clone(), pair[1].clone()));
        }
    }
    let mut tags = vec![BioTag::O; n_tokens];
    for span in sorted {
        if span.end >= n_tokens || span.start > span.end {
            return Err(BioError::SpanOutOfRange((*span).clone(), n_tokens));
        }
        tags[span.start] = BioTag::B(span.label.clone());
        for tag in tags.iter_mut().take(span.end + 1).skip(span.start + 1) {
            *tag = BioTag::I(span.label.clone());
        }
    }
    Ok(tags)
}

/// Decodes a BIO sequence into typed spans. Total: ill-formed input is
/// repaired, never rejected.
pub fn decode_bio(tags: &[BioTag]) -> Vec<TypedSpan> {
    let mut spans = Vec::new();
    let mut open: Option<TypedSpan> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            BioTag::O => {
                if let Some(span) = open.take() {
                    spans.push(span);
                }
            }
            BioTag::B(label) => {
                if let Some(span) = open.take() {
                    spans.push(span);
                }
                open = Some(TypedSpan::new(i, i, label.clone()));
            }
            BioTag::I(label) => match &mut open {
                Some(span) if span.label == *label => span.end = i,
                _ => {
                    // I without a matching open span: repair as B.
                    if let Some(span) = open.take() {
                        spans.push(span);
                    }
                    open = Some(TypedSpan::new(i, i, label.clone()));
                }
            },
        }
    }
    if let Some(span) = open {
        spans.push(span);
    }
    spans
}

/// True when no `I-X` follows `O` or a differently-labeled tag.
pub fn is_well_formed(tags: &[BioTag]) -> bool {
    let mut prev: Option<&str> = None;
    for tag in tags {
        match tag {
            BioTag::I(label) if prev != Some(label.as_str()) => return false,
            _ => {}
        }
        prev = tag.label();
    }
    true
}

/// Index space for BIO tags over a label set: `O` is 0, then `B-l`/`I-l`
/// pairs in label order. Used by the token classifier heads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BioTagVocab {
    labels: Vec<String>,
}

impl BioTagVocab {
    pub fn new(mut labels: Vec<String>) -> Self {
        labels.sort();
        labels.dedup();
        BioTagVocab { labels }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn size(&self) -> usize {
        1 + 2 * self.labels.len()
    }

    pub fn index(&self, tag: &BioTag) -> Option<usize> {
        match tag {
            BioTag::O => Some(0),
            BioTag::B(l) => self.label_pos(l).map(|p| 1 + 2 * p),
            BioTag::I(l) => self.label_pos(l).map(|p| 2 + 2 * p),
        }
    }

    pub fn tag(&self, index: usize) -> Option<BioTag> {
        if index == 0 {
            return Some(BioTag::O);
        }
        let p = (index - 1) / 2;
        let label = self.labels.get(p)?.clone();
        Some(if index % 2 == 1 { BioTag::B(label) } else { BioTag::I(label) })
    }

    fn label_pos(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tag(s: &str) -> BioTag {
        s.parse().unwrap()
    }

    #[test]
    fn encode_single_span() {
        let tags = encode_bio(&[TypedSpan::new(1, 2, "COMMODITY")], 4).unwrap();
        let rendered: Vec<String> = tags.iter().map(|t| t.to_string()).collect();
        assert_eq!(rendered, vec!["O", "B-COMMODITY", "I-COMMODITY", "O"]);
    }

    #[test]
    fn encode_no_spans_is_all_o() {
        let tags = encode_bio(&[], 3).unwrap();
        assert_eq!(tags, vec![BioTag::O, BioTag::O, BioTag::O]);
    }

    #[test]
    fn encode_rejects_overlap() {
        let a = TypedSpan::new(0, 2, "DATE");
        let b = TypedSpan::new(2, 3, "DATE");
        assert_eq!(
            encode_bio(&[a.clone(), b.clone()], 5),
            Err(BioError::OverlappingSpans(a, b))
        );
    }

    #[test]
    fn decode_simple() {
        let tags = vec![tag("O"), tag("B-DATE"), tag("I-DATE")];
        assert_eq!(decode_bio(&tags), vec![TypedSpan::new(1, 2, "DATE")]);
    }

    #[test]
    fn decode_repairs_dangling_i() {
        let tags = vec![tag("I-DATE"), tag("O")];
        assert_eq!(decode_bio(&tags), vec![TypedSpan::new(0, 0, "DATE")]);
    }

    #[test]
    fn decode_repairs_label_switch() {
        // I-B after B-A: the A span closes, a new B span opens.
        let tags = vec![tag("B-A"), tag("I-B"), tag("I-B")];
        assert_eq!(
            decode_bio(&tags),
            vec![TypedSpan::new(0, 0, "A"), TypedSpan::new(1, 2, "B")]
        );
    }

    #[test]
    fn decoded_spans_are_always_well_formed() {
        // decode then re-encode must succeed: no overlaps in decoder output.
        let tags = vec![tag("I-A"), tag("I-B"), tag("B-A"), tag("I-A"), tag("I-C")];
        let spans = decode_bio(&tags);
        assert!(encode_bio(&spans, tags.len()).is_ok());
    }

    #[test]
    fn tag_vocab_round_trips_indices() {
        let vocab = BioTagVocab::new(vec!["DATE".into(), "COMMODITY".into()]);
        assert_eq!(vocab.size(), 5);
        for i in 0..vocab.size() {
            let t = vocab.tag(i).unwrap();
            assert_eq!(vocab.index(&t), Some(i));
        }
        assert_eq!(vocab.index(&tag("B-UNKNOWN")), None);
        assert_eq!(vocab.tag(99), None);
    }

    /// Random non-overlapping span sets over short sequences.
    fn arb_span_set() -> impl Strategy<Value = (Vec<TypedSpan>, usize)> {
        (4usize..24).prop_flat_map(|n| {
            let spans = proptest::collection::vec(
                (0usize..n, 0usize..4, 0usize..3),
                0..6,
            )
            .prop_map(move |raw| {
                let labels = ["COMMODITY", "DATE", "COUNTRY"];
                let mut spans: Vec<TypedSpan> = Vec::new();
                for (start, extra, label) in raw {
                    let end = (start + extra).min(n - 1);
                    let candidate = TypedSpan::new(start, end, labels[label]);
                    if !spans.iter().any(|s| s.overlaps(&candidate)) {
                        spans.push(candidate);
                    }
                }
                spans.sort();
                spans
            });
            (spans, Just(n))
        })
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip((spans, n) in arb_span_set()) {
            let tags = encode_bio(&spans, n).unwrap();
            prop_assert!(is_well_formed(&tags));
            prop_assert_eq!(decode_bio(&tags), spans);
        }

        #[test]
        fn decode_is_total_and_output_well_formed(raw in proptest::collection::vec(0usize..5, 0..32)) {
            let labels = ["A", "B"];
            let tags: Vec<BioTag> = raw.iter().map(|&r| match r {
                0 => BioTag::O,
                1 => BioTag::B(labels[0].into()),
                2 => BioTag::I(labels[0].into()),
                3 => BioTag::B(labels[1].into()),
                _ => BioTag::I(labels[1].into()),
            }).collect();
            let spans = decode_bio(&tags);
            // Spans are sorted, non-overlapping, and re-encodable.
            prop_assert!(encode_bio(&spans, tags.len().max(1)).is_ok());
        }
    }
}
