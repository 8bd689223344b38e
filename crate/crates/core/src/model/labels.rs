//! Label inventories for the corpus: entity types, event types, argument
//! roles, and the three event-property value sets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::bio::TypedSpan;

/// Role assigned to a candidate pair that is not an argument of the event.
pub const NONE_ROLE: &str = "NONE";

/// Whether an event happened or was negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    #[serde(rename = "POSITIVE")]
    Positive,
    #[serde(rename = "NEGATIVE")]
    Negative,
}

/// Whether an event is asserted fact or hypothetical/future/generic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "ASSERTED")]
    Asserted,
    #[serde(rename = "OTHER")]
    Other,
}

/// Whether an event intensified, eased, or stayed neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Intensity {
    #[serde(rename = "NEUTRAL")]
    Neutral,
    #[serde(rename = "EASED")]
    Eased,
    #[serde(rename = "INTENSIFIED")]
    Intensified,
}

impl Polarity {
    pub const VALUES: [Polarity; 2] = [Polarity::Positive, Polarity::Negative];

    pub fn as_str(&self) -> &'static str {
        match self {
            Polarity::Positive => "POSITIVE",
            Polarity::Negative => "NEGATIVE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match normalize_label(s).as_str() {
            "POSITIVE" => Some(Polarity::Positive),
            "NEGATIVE" => Some(Polarity::Negative),
            _ => None,
        }
    }
}

impl Modality {
    pub const VALUES: [Modality; 2] = [Modality::Asserted, Modality::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::Asserted => "ASSERTED",
            Modality::Other => "OTHER",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match normalize_label(s).as_str() {
            "ASSERTED" => Some(Modality::Asserted),
            "OTHER" => Some(Modality::Other),
            _ => None,
        }
    }
}

impl Intensity {
    pub const VALUES: [Intensity; 3] =
        [Intensity::Neutral, Intensity::Eased, Intensity::Intensified];

    pub fn as_str(&self) -> &'static str {
        match self {
            Intensity::Neutral => "NEUTRAL",
            Intensity::Eased => "EASED",
            Intensity::Intensified => "INTENSIFIED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match normalize_label(s).as_str() {
            "NEUTRAL" => Some(Intensity::Neutral),
            "EASED" => Some(Intensity::Eased),
            "INTENSIFIED" => Some(Intensity::Intensified),
            _ => None,
        }
    }
}

/// The three property values carried by every event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventProperties {
    pub polarity: Polarity,
    pub modality: Modality,
    pub intensity: Intensity,
}

impl Default for EventProperties {
    fn default() -> Self {
        EventProperties {
            polarity: Polarity::Positive,
            modality: Modality::Asserted,
            intensity: Intensity::Neutral,
        }
    }
}

/// Canonical label form: uppercase, spaces and hyphens folded to underscores.
///
/// Raw annotation is not case-stable (`Location` vs `LOCATION`,
/// `SLOW-WEAK` vs `SLOW_WEAK`); everything passes through here at ingest.
pub fn normalize_label(raw: &str) -> String {
    raw.trim()
        .chars()
        .map(|c| match c {
            ' ' | '-' => '_',
            c => c.to_ascii_uppercase(),
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("vocabulary file is malformed: {0}")]
    Malformed(String),
    #[error("failed to read vocabulary: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse vocabulary JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Closed label inventories plus the per-event-type permitted-role matrix.
///
/// Shipped as a versioned JSON file; see `assets/vocab_crude_oil_news.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVocab {
    pub version: String,
    pub entity_types: Vec<String>,
    pub event_types: Vec<String>,
    pub argument_roles: Vec<String>,
    /// event type -> roles observed for it. Event types absent from the
    /// matrix permit any role (reported as a warning, not a violation).
    pub role_matrix: BTreeMap<String, Vec<String>>,
}

static CRUDE_OIL_NEWS_VOCAB: &str = include_str!("../../assets/vocab_crude_oil_news.json");

impl LabelVocab {
    /// The label inventory of the crude-oil news corpus (21/18/21).
    pub fn crude_oil_news() -> Self {
        let vocab: LabelVocab =
            serde_json::from_str(CRUDE_OIL_NEWS_VOCAB).expect("built-in vocabulary must parse");
        vocab.validate().expect("built-in vocabulary must validate");
        vocab
    }

    pub fn from_json(json: &str) -> Result<Self, VocabError> {
        let vocab: LabelVocab = serde_json::from_str(json)?;
        vocab.validate()?;
        Ok(vocab)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, VocabError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("vocab serialization cannot fail")
    }

    pub fn validate(&self) -> Result<(), VocabError> {
        let none_count = self.argument_roles.iter().filter(|r| *r == NONE_ROLE).count();
        if none_count != 1 {
            return Err(VocabError::Malformed(format!(
                "argument_roles must contain NONE exactly once, found {none_count}"
            )));
        }
        for (name, set) in [
            ("entity_types", &self.entity_types),
            ("event_types", &self.event_types),
            ("argument_roles", &self.argument_roles),
        ] {
            let mut sorted = set.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != set.len() {
                return Err(VocabError::Malformed(format!("{name} contains duplicates")));
            }
            if let Some(bad) = set.iter().find(|l| **l != normalize_label(l)) {
                return Err(VocabError::Malformed(format!(
                    "{name} entry {bad:?} is not in canonical form"
                )));
            }
        }
        for (event_type, roles) in &self.role_matrix {
            if !self.event_types.contains(event_type) {
                return Err(VocabError::Malformed(format!(
                    "role matrix references unknown event type {event_type:?}"
                )));
            }
            for role in roles {
                if !self.argument_roles.contains(role) {
                    return Err(VocabError::Malformed(format!(
                        "role matrix references unknown role {role:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn has_entity_type(&self, t: &str) -> bool {
        self.entity_types.iter().any(|x| x == t)
    }

    pub fn has_event_type(&self, t: &str) -> bool {
        self.event_types.iter().any(|x| x == t)
    }

    pub fn has_role(&self, r: &str) -> bool {
        self.argument_roles.iter().any(|x| x == r)
    }

    /// Roles observed for an event type, or `None` when the matrix has no
    /// entry (any role is then permitted).
    pub fn permitted_roles(&self, event_type: &str) -> Option<&[String]> {
        self.role_matrix.get(event_type).map(|v| v.as_slice())
    }

    /// Content hash, recorded in saved-model manifests.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("vocab serialization cannot fail");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// One event as used by gold-structure validation: trigger, arguments, and
/// the three property values.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub trigger: TypedSpan,
    pub arguments: Vec<(TypedSpan, String)>,
    pub properties: EventProperties,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownEventType(String),
    UnknownEntityType(String),
    UnknownRole(String),
    RoleNotPermitted { event_type: String, role: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::UnknownEventType(t) => write!(f, "unknown event type {t:?}"),
            Violation::UnknownEntityType(t) => write!(f, "unknown entity type {t:?}"),
            Violation::UnknownRole(r) => write!(f, "unknown argument role {r:?}"),
            Violation::RoleNotPermitted { event_type, role } => {
                write!(f, "role {role:?} not permitted for event type {event_type:?}")
            }
        }
    }
}

/// Checks an event record against the vocabulary. Returns every violation
/// found; an empty list means the record is valid.
pub fn validate_event(rec: &EventRecord, vocab: &LabelVocab) -> Vec<Violation> {
    let mut violations = Vec::new();
    if !vocab.has_event_type(&rec.trigger.label) {
        violations.push(Violation::UnknownEventType(rec.trigger.label.clone()));
    }
    for (entity, role) in &rec.arguments {
        if !vocab.has_entity_type(&entity.label) {
            violations.push(Violation::UnknownEntityType(entity.label.clone()));
        }
        if !vocab.has_role(role) {
            violations.push(Violation::UnknownRole(role.clone()));
            continue;
        }
        match vocab.permitted_roles(&rec.trigger.label) {
            Some(permitted) if !permitted.iter().any(|p| p == role) => {
                violations.push(Violation::RoleNotPermitted {
                    event_type: rec.trigger.label.clone(),
                    role: role.clone(),
                });
            }
            Some(_) => {}
            None => {
                // No matrix entry: permitted by default.
                log::warn!(
                    "no role matrix entry for event type {:?}; accepting role {:?}",
                    rec.trigger.label,
                    role
                );
            }
        }
    }
    violations
}
