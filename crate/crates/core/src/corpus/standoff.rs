//! Parser for brat standoff annotation (.ann alongside .txt).
//!
//! Only T (text-bound), E (event), and A (attribute) records are modeled.
//! Comment (`#`), relation (`R`), normalization (`N`), and modification
//! (`M`/`*`) lines are skipped. Offsets are character offsets.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StandoffError {
    #[error("malformed annotation line {0}: {1}")]
    MalformedLine(usize, String),
    #[error("dangling reference to {0:?}")]
    DanglingReference(String),
    #[error("span of {0:?} out of text bounds")]
    SpanOutOfBounds(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

/// A T record: typed character span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextBound {
    pub id: String,
    pub ty: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// An E record: event trigger plus role-labeled arguments, all T references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventAnn {
    pub id: String,
    pub ty: String,
    pub trigger: String,
    pub args: Vec<(String, String)>, // (role, T id)
}

/// An A record: named attribute value attached to an event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeAnn {
    pub id: String,
    pub name: String,
    pub target: String, // E id
    pub value: String,
}

/// A parsed and cross-validated standoff document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawStandoffDoc {
    pub doc_id: String,
    pub text: String,
    pub mentions: Vec<TextBound>,
    pub events: Vec<EventAnn>,
    pub attributes: Vec<AttributeAnn>,
}

impl RawStandoffDoc {
    pub fn mention(&self, id: &str) -> Option<&TextBound> {
        self.mentions.iter().find(|m| m.id == id)
    }

    /// T ids used as an event trigger.
    pub fn trigger_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.events.iter().map(|e| e.trigger.as_str()).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Parses an .ann/.txt pair and validates all cross-references and spans.
pub fn parse_standoff(doc_id: &str, txt: &str, ann: &str) -> Result<RawStandoffDoc, StandoffError> {
    if txt.is_empty() {
        return Err(StandoffError::EmptyInput("txt"));
    }
    if ann.trim().is_empty() {
        return Err(StandoffError::EmptyInput("ann"));
    }
    let n_chars = txt.chars().count();
    let mut mentions = Vec::new();
    let mut events = Vec::new();
    let mut attributes = Vec::new();

    for (idx, line) in ann.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |why: &str| StandoffError::MalformedLine(line_no, why.to_string());
        match line.chars().next().unwrap() {
            'T' => {
                let (id, rest) = split_id(line).ok_or_else(|| malformed("missing tab after id"))?;
                let (spec, text) = match rest.split_once('\t') {
                    Some((s, t)) => (s, t.to_string()),
                    None => (rest, String::new()),
                };
                let mut parts = spec.split_whitespace();
                let ty = parts.next().ok_or_else(|| malformed("missing type"))?.to_string();
                let start_str = parts.next().ok_or_else(|| malformed("missing start offset"))?;
                if start_str.contains(';') {
                    return Err(malformed("discontinuous spans are not supported"));
                }
                let end_str = parts.next().ok_or_else(|| malformed("missing end offset"))?;
                if parts.next().is_some() || end_str.contains(';') {
                    return Err(malformed("discontinuous spans are not supported"));
                }
                let start: usize =
                    start_str.parse().map_err(|_| malformed("start offset not a number"))?;
                let end: usize =
                    end_str.parse().map_err(|_| malformed("end offset not a number"))?;
                if start >= end {
                    return Err(malformed("empty or inverted span"));
                }
                mentions.push(TextBound { id: id.to_string(), ty, start, end, text });
            }
            'E' => {
                let (id, rest) = split_id(line).ok_or_else(|| malformed("missing tab after id"))?;
                let mut parts = rest.split_whitespace();
                let head = parts.next().ok_or_else(|| malformed("missing trigger slot"))?;
                let (ty, trigger) =
                    head.split_once(':').ok_or_else(|| malformed("trigger slot needs TYPE:Tid"))?;
                let mut args = Vec::new();
                for part in parts {
                    let (role, target) = part
                        .split_once(':')
                        .ok_or_else(|| malformed("argument slot needs ROLE:Tid"))?;
                    args.push((role.to_string(), target.to_string()));
                }
                events.push(EventAnn {
                    id: id.to_string(),
                    ty: ty.to_string(),
                    trigger: trigger.to_string(),
                    args,
                });
            }
            'A' => {
                let (id, rest) = split_id(line).ok_or_else(|| malformed("missing tab after id"))?;
                let fields: Vec<&str> = rest.split_whitespace().collect();
                match fields.as_slice() {
                    [name, target, value] => attributes.push(AttributeAnn {
                        id: id.to_string(),
                        name: name.to_string(),
                        target: target.to_string(),
                        value: value.to_string(),
                    }),
                    [name, target] => attributes.push(AttributeAnn {
                        id: id.to_string(),
                        name: name.to_string(),
                        target: target.to_string(),
                        value: "true".to_string(),
                    }),
                    _ => return Err(malformed("attribute needs NAME Eid [VALUE]")),
                }
            }
            '#' | 'R' | 'N' | 'M' | '*' => {
                log::debug!("{doc_id}: skipping unmodeled annotation line {line_no}");
            }
            _ => return Err(malformed("unknown record type")),
        }
    }

    // Cross-reference and bounds validation.
    for m in &mentions {
        if m.end > n_chars {
            return Err(StandoffError::SpanOutOfBounds(m.id.clone()));
        }
        let actual: String =
            txt.chars().skip(m.start).take(m.end - m.start).collect();
        if !m.text.is_empty() && m.text != actual {
            log::warn!(
                "{doc_id}: {} text {:?} differs from document slice {:?}",
                m.id,
                m.text,
                actual
            );
        }
    }
    let t_ids: std::collections::BTreeSet<&str> =
        mentions.iter().map(|m| m.id.as_str()).collect();
    let e_ids: std::collections::BTreeSet<&str> = events.iter().map(|e| e.id.as_str()).collect();
    for e in &events {
        if !t_ids.contains(e.trigger.as_str()) {
            return Err(StandoffError::DanglingReference(e.trigger.clone()));
        }
        for (_, target) in &e.args {
            if !t_ids.contains(target.as_str()) {
                return Err(StandoffError::DanglingReference(target.clone()));
            }
        }
    }
    for a in &attributes {
        if !e_ids.contains(a.target.as_str()) {
            return Err(StandoffError::DanglingReference(a.target.clone()));
        }
    }

    Ok(RawStandoffDoc { doc_id: doc_id.to_string(), text: txt.to_string(), mentions, events, attributes })
}

fn split_id(line: &str) -> Option<(&str, &str)> {
    let (id, rest) = line.split_once('\t')?;
    if id.len() < 2 {
        return None;
    }
    Some((id, rest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_mention() {
        let doc =
            parse_standoff("d", "World oil prices", "T1\tCOMMODITY 6 9\toil").unwrap();
        assert_eq!(doc.mentions.len(), 1);
        let m = &doc.mentions[0];
        assert_eq!((m.start, m.end, m.text.as_str()), (6, 9, "oil"));
        assert_eq!(m.ty, "COMMODITY");
    }

    #[test]
    fn dangling_event_reference_is_an_error() {
        let err = parse_standoff(
            "d",
            "World oil prices",
            "T1\tCOMMODITY 6 9\toil\nE1\tOVERSUPPLY:T9",
        )
        .unwrap_err();
        assert_eq!(err, StandoffError::DanglingReference("T9".to_string()));
    }

    #[test]
    fn dangling_attribute_reference_is_an_error() {
        let err = parse_standoff(
            "d",
            "World oil prices",
            "T1\tCOMMODITY 6 9\toil\nA1\tPolarity E7 NEGATIVE",
        )
        .unwrap_err();
        assert_eq!(err, StandoffError::DanglingReference("E7".to_string()));
    }

    #[test]
    fn span_out_of_bounds_is_an_error() {
        let err = parse_standoff("d", "short", "T1\tCOMMODITY 2 99\tx").unwrap_err();
        assert_eq!(err, StandoffError::SpanOutOfBounds("T1".to_string()));
    }

    #[test]
    fn rejects_discontinuous_spans() {
        let err =
            parse_standoff("d", "some text here", "T1\tX 0 4;5 9\tsome text").unwrap_err();
        assert!(matches!(err, StandoffError::MalformedLine(1, _)));
    }

    #[test]
    fn skips_comment_and_relation_lines() {
        let doc = parse_standoff(
            "d",
            "World oil prices",
            "#1\tAnnotatorNotes T1 checked\nT1\tCOMMODITY 6 9\toil\nR1\tAlias Arg1:T1 Arg2:T1",
        )
        .unwrap();
        assert_eq!(doc.mentions.len(), 1);
        assert!(doc.events.is_empty());
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert_eq!(
            parse_standoff("d", "", "T1\tX 0 1\ta").unwrap_err(),
            StandoffError::EmptyInput("txt")
        );
        assert_eq!(
            parse_standoff("d", "abc", "  \n").unwrap_err(),
            StandoffError::EmptyInput("ann")
        );
    }

    #[test]
    fn binary_attribute_defaults_to_true() {
        let doc = parse_standoff(
            "d",
            "World oil prices",
            "T1\tOVERSUPPLY 6 9\toil\nE1\tOVERSUPPLY:T1\nA1\tNegated E1",
        )
        .unwrap();
        assert_eq!(doc.attributes[0].value, "true");
    }
}
