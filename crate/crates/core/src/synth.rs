//! Synthetic commodity-news corpus with deterministic cue-to-label rules,
//! emitted as brat standoff so it exercises the full ingest path.
//!
//! Construction rules:
//! * Entity and trigger surfaces map one-to-one to types, and argument roles
//!   are a fixed function of (event type, entity type); pairs outside that
//!   function are NONE. Two-event sentences always mix the market family
//!   with the geo family, so cross-event candidates are NONE by the same
//!   function.
//! * Event properties are sentence-scoped and cued by single words:
//!   `not` = NEGATIVE, `may` = OTHER, `sharply` = INTENSIFIED,
//!   `mildly` = EASED. Cue placement is configurable: adjacent to the
//!   trigger, or in a sentence-initial block at least two tokens away from
//!   every trigger (outside any 3-token window).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::annotator::FallbackAnnotator;
use crate::corpus::standoff::parse_standoff;
use crate::corpus::{to_canonical, Corpus, CorpusError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CuePlacement {
    /// Cues sit next to the trigger (modality+polarity before, intensity
    /// after).
    Adjacent,
    /// Cues form a sentence-initial block, outside every trigger's 3-token
    /// window.
    FarFromTrigger,
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_sentences: usize,
    pub seed: u64,
    pub cue_placement: CuePlacement,
    /// Probability of a two-event sentence.
    pub two_event_fraction: f64,
    pub sentences_per_doc: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_sentences: 200,
            seed: 7,
            cue_placement: CuePlacement::Adjacent,
            two_event_fraction: 0.5,
            sentences_per_doc: 10,
        }
    }
}

const COMMODITIES: &[&str] = &["oil", "gas", "crude"];
const FIN_ATTRS: &[&str] = &["prices", "supply", "inventories", "production"];
const DATES: &[&str] = &["Tuesday", "Friday"];
const ORGS: &[&str] = &["OPEC", "UN"];
const COUNTRIES: &[&str] = &["Russia", "Iran", "Libya", "Saudi Arabia"];
const MOVE_TRIGGERS: &[(&str, &str)] =
    &[("fall", "MOVEMENT_DOWN_LOSS"), ("rise", "MOVEMENT_UP_GAIN")];
const STOCK_TRIGGERS: &[(&str, &str)] = &[("surplus", "OVERSUPPLY"), ("shortage", "SHORTAGE")];
const POLARITY_CUE: &str = "not";
const MODALITY_CUE: &str = "may";
const INTENSIFIED_CUE: &str = "sharply";
const EASED_CUE: &str = "mildly";

/// The deterministic role function. NONE is encoded as a `None` return.
pub fn gold_role(event_type: &str, entity_type: &str) -> Option<&'static str> {
    match (event_type, entity_type) {
        ("MOVEMENT_DOWN_LOSS" | "MOVEMENT_UP_GAIN", "COMMODITY") => Some("ITEM"),
        ("MOVEMENT_DOWN_LOSS" | "MOVEMENT_UP_GAIN", "FINANCIAL_ATTRIBUTE") => Some("ATTRIBUTE"),
        ("MOVEMENT_DOWN_LOSS" | "MOVEMENT_UP_GAIN", "DATE") => Some("CONTRACT_DATE"),
        ("OVERSUPPLY" | "SHORTAGE", "FINANCIAL_ATTRIBUTE") => Some("ATTRIBUTE"),
        ("OVERSUPPLY" | "SHORTAGE", "COMMODITY") => Some("ITEM"),
        ("EMBARGO", "ORGANIZATION") => Some("IMPOSER"),
        ("EMBARGO", "COUNTRY") => Some("IMPOSEE"),
        ("CAUSE_MOVEMENT_DOWN_LOSS", "COUNTRY") => Some("SUPPLIER"),
        _ => None,
    }
}

struct SentencePlan {
    tokens: Vec<String>,
    /// (first token, last token, entity type)
    entities: Vec<(usize, usize, &'static str)>,
    /// (token index, event type)
    triggers: Vec<(usize, &'static str)>,
    polarity: &'static str,
    modality: &'static str,
    intensity: &'static str,
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

struct GroupCues {
    before: Vec<String>,
    after: Vec<String>,
}

/// Market-family group: movement or stock-level event over commodity-desk
/// entities.
fn market_group(rng: &mut ChaCha8Rng, plan: &mut SentencePlan, cues: &GroupCues) {
    let toks = &mut plan.tokens;
    if rng.random_range(0..2) == 0 {
        // [the] C F <cues> T <after> [on D]
        if rng.random_range(0..2) == 0 {
            toks.push("the".into());
        }
        let c = pick(rng, COMMODITIES);
        plan.entities.push((toks.len(), toks.len(), "COMMODITY"));
        toks.push(c.into());
        let f = pick(rng, FIN_ATTRS);
        plan.entities.push((toks.len(), toks.len(), "FINANCIAL_ATTRIBUTE"));
        toks.push(f.into());
        toks.extend(cues.before.iter().cloned());
        let (t, ty) = pick(rng, MOVE_TRIGGERS);
        plan.triggers.push((toks.len(), ty));
        toks.push(t.into());
        toks.extend(cues.after.iter().cloned());
        if rng.random_range(0..2) == 0 {
            toks.push("on".into());
            let d = pick(rng, DATES);
            plan.entities.push((toks.len(), toks.len(), "DATE"));
            toks.push(d.into());
        }
    } else {
        // F <cues> T_stock <after> worried traders
        let f = pick(rng, FIN_ATTRS);
        plan.entities.push((toks.len(), toks.len(), "FINANCIAL_ATTRIBUTE"));
        toks.push(f.into());
        toks.extend(cues.before.iter().cloned());
        let (t, ty) = pick(rng, STOCK_TRIGGERS);
        plan.triggers.push((toks.len(), ty));
        toks.push(t.into());
        toks.extend(cues.after.iter().cloned());
        toks.push("worried".into());
        toks.push("traders".into());
    }
}

/// Geo-family group: embargo or production-cut event over actors.
fn geo_group(rng: &mut ChaCha8Rng, plan: &mut SentencePlan, cues: &GroupCues) {
    let toks = &mut plan.tokens;
    if rng.random_range(0..2) == 0 {
        // O imposed <cues> embargo <after> against K
        let o = pick(rng, ORGS);
        plan.entities.push((toks.len(), toks.len(), "ORGANIZATION"));
        toks.push(o.into());
        toks.push("imposed".into());
        toks.extend(cues.before.iter().cloned());
        plan.triggers.push((toks.len(), "EMBARGO"));
        toks.push("embargo".into());
        toks.extend(cues.after.iter().cloned());
        toks.push("against".into());
        let k = pick(rng, COUNTRIES);
        let parts: Vec<&str> = k.split(' ').collect();
        plan.entities.push((toks.len(), toks.len() + parts.len() - 1, "COUNTRY"));
        toks.extend(parts.iter().map(|p| p.to_string()));
    } else {
        // K <cues> cuts <after> output
        let k = pick(rng, COUNTRIES);
        let parts: Vec<&str> = k.split(' ').collect();
        plan.entities.push((toks.len(), toks.len() + parts.len() - 1, "COUNTRY"));
        toks.extend(parts.iter().map(|p| p.to_string()));
        toks.extend(cues.before.iter().cloned());
        plan.triggers.push((toks.len(), "CAUSE_MOVEMENT_DOWN_LOSS"));
        toks.push("cuts".into());
        toks.extend(cues.after.iter().cloned());
        toks.push("output".into());
    }
}

fn build_sentence(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> SentencePlan {
    let polarity = if rng.random_range(0..100) < 35 { "NEGATIVE" } else { "POSITIVE" };
    let modality = if rng.random_range(0..100) < 35 { "OTHER" } else { "ASSERTED" };
    let intensity = match rng.random_range(0..100) {
        0..=24 => "EASED",
        25..=49 => "INTENSIFIED",
        _ => "NEUTRAL",
    };
    let mut plan = SentencePlan {
        tokens: Vec::new(),
        entities: Vec::new(),
        triggers: Vec::new(),
        polarity,
        modality,
        intensity,
    };
    let mut cue_words: Vec<String> = Vec::new();
    if modality == "OTHER" {
        cue_words.push(MODALITY_CUE.into());
    }
    if polarity == "NEGATIVE" {
        cue_words.push(POLARITY_CUE.into());
    }
    let intensity_cue = match intensity {
        "INTENSIFIED" => Some(INTENSIFIED_CUE.to_string()),
        "EASED" => Some(EASED_CUE.to_string()),
        _ => None,
    };

    let cues = match cfg.cue_placement {
        CuePlacement::Adjacent => GroupCues {
            before: cue_words.clone(),
            after: intensity_cue.iter().cloned().collect(),
        },
        CuePlacement::FarFromTrigger => {
            // Sentence-initial cue block plus a two-token buffer keeps every
            // cue out of the trigger windows.
            plan.tokens.extend(cue_words.iter().cloned());
            plan.tokens.extend(intensity_cue.iter().cloned());
            plan.tokens.push("reports".into());
            plan.tokens.push("suggest".into());
            GroupCues { before: vec![], after: vec![] }
        }
    };

    let two_events = rng.random_range(0.0..1.0) < cfg.two_event_fraction;
    if two_events {
        if rng.random_range(0..2) == 0 {
            market_group(rng, &mut plan, &cues);
            plan.tokens.push(if rng.random_range(0..2) == 0 { "while" } else { "as" }.into());
            geo_group(rng, &mut plan, &cues);
        } else {
            geo_group(rng, &mut plan, &cues);
            plan.tokens.push("while".into());
            market_group(rng, &mut plan, &cues);
        }
    } else if rng.random_range(0..2) == 0 {
        market_group(rng, &mut plan, &cues);
    } else {
        geo_group(rng, &mut plan, &cues);
    }
    plan.tokens.push(".".into());
    plan
}

/// One generated document in brat standoff form.
pub struct SynthDoc {
    pub doc_id: String,
    pub txt: String,
    pub ann: String,
}

/// Generates the corpus as brat (.txt, .ann) document pairs.
pub fn generate_docs(cfg: &SynthConfig) -> Vec<SynthDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut docs = Vec::new();
    let mut remaining = cfg.n_sentences;
    let mut doc_no = 0;
    while remaining > 0 {
        let in_doc = cfg.sentences_per_doc.min(remaining);
        remaining -= in_doc;
        let mut txt = String::new();
        let mut ann = String::new();
        let mut t_id = 0usize;
        let mut e_id = 0usize;
        let mut a_id = 0usize;
        for si in 0..in_doc {
            if si > 0 {
                txt.push(' ');
            }
            let plan = build_sentence(&mut rng, cfg);
            // Char offsets per token as the sentence is appended.
            let mut offsets = Vec::with_capacity(plan.tokens.len());
            for (i, tok) in plan.tokens.iter().enumerate() {
                if i > 0 {
                    txt.push(' ');
                }
                let start = txt.chars().count();
                txt.push_str(tok);
                offsets.push((start, txt.chars().count()));
            }
            let mut entity_tids = Vec::new();
            for &(first, last, ty) in &plan.entities {
                t_id += 1;
                let (s, _) = offsets[first];
                let (_, e) = offsets[last];
                let surface: String =
                    plan.tokens[first..=last].join(" ");
                ann.push_str(&format!("T{t_id}\t{ty} {s} {e}\t{surface}\n"));
                entity_tids.push((format!("T{t_id}"), ty));
            }
            for &(tok_idx, ev_ty) in &plan.triggers {
                t_id += 1;
                let (s, e) = offsets[tok_idx];
                ann.push_str(&format!(
                    "T{t_id}\t{ev_ty} {s} {e}\t{}\n",
                    plan.tokens[tok_idx]
                ));
                e_id += 1;
                let mut line = format!("E{e_id}\t{ev_ty}:T{t_id}");
                for (tid, ent_ty) in &entity_tids {
                    if let Some(role) = gold_role(ev_ty, ent_ty) {
                        line.push_str(&format!(" {role}:{tid}"));
                    }
                }
                ann.push_str(&line);
                ann.push('\n');
                for (name, value) in [
                    ("Polarity", plan.polarity),
                    ("Modality", plan.modality),
                    ("Intensity", plan.intensity),
                ] {
                    a_id += 1;
                    ann.push_str(&format!("A{a_id}\t{name} E{e_id} {value}\n"));
                }
            }
        }
        doc_no += 1;
        docs.push(SynthDoc { doc_id: format!("synth-{doc_no:03}"), txt, ann });
    }
    docs
}

/// Generates and ingests the corpus through the standard brat path.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<Corpus, CorpusError> {
    let annotator = FallbackAnnotator;
    let mut documents = Vec::new();
    for doc in generate_docs(cfg) {
        let raw = parse_standoff(&doc.doc_id, &doc.txt, &doc.ann)
            .map_err(|e| CorpusError::InvalidDocument {
                doc_id: doc.doc_id.clone(),
                sentence: 0,
                why: e.to_string(),
            })?;
        documents.push(to_canonical(&raw, &annotator)?);
    }
    Ok(Corpus::new(documents))
}
