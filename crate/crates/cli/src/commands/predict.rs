use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use petrel_core::corpus::annotator::FallbackAnnotator;
use petrel_core::corpus::standoff::RawStandoffDoc;
use petrel_core::corpus::{to_canonical, Corpus, Document, Sentence};
use petrel_core::model::{TypedSpan, NONE_ROLE};
use petrel_core::model_io::{load_model, LoadedModel};
use petrel_core::tasks::PropertyKind;

use super::{CliResult, ExitCode, ExitCtx};

#[derive(Serialize)]
struct PredArgument {
    role: String,
    #[serde(rename = "type")]
    entity_type: String,
    start_tok: usize,
    end_tok: usize,
}

#[derive(Serialize)]
struct PredEvent {
    #[serde(rename = "type")]
    event_type: String,
    start_tok: usize,
    end_tok: usize,
    polarity: String,
    modality: String,
    intensity: String,
    arguments: Vec<PredArgument>,
}

#[derive(Serialize)]
struct PredEntity {
    #[serde(rename = "type")]
    entity_type: String,
    start_tok: usize,
    end_tok: usize,
}

#[derive(Serialize)]
struct PredSentence {
    tokens: Vec<String>,
    entities: Vec<PredEntity>,
    events: Vec<PredEvent>,
}

#[derive(Serialize)]
struct PredDocument {
    doc_id: String,
    sentences: Vec<PredSentence>,
}

#[derive(Serialize)]
struct Predictions {
    documents: Vec<PredDocument>,
}

pub fn run(model_dir: &Path, input: &Path, out: Option<&Path>) -> CliResult {
    let model = load_model(model_dir).or_exit(ExitCode::Model)?;

    let documents = load_input(input)?;
    let mut out_docs = Vec::new();
    for doc in &documents {
        let mut sentences = Vec::new();
        for sent in &doc.sentences {
            sentences.push(predict_sentence(&model, sent));
        }
        out_docs.push(PredDocument { doc_id: doc.doc_id.clone(), sentences });
    }
    let predictions = Predictions { documents: out_docs };
    let json = serde_json::to_string_pretty(&predictions).or_exit(ExitCode::Data)?;
    match out {
        Some(path) => std::fs::write(path, json).or_exit(ExitCode::Data)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn load_input(input: &Path) -> Result<Vec<Document>, super::CliError> {
    if input.extension().and_then(|e| e.to_str()) == Some("json") {
        let corpus = Corpus::load(input).or_exit(ExitCode::Data)?;
        return Ok(corpus.documents);
    }
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("cannot read {}", input.display()))
        .or_exit(ExitCode::Data)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let doc_id = input.file_stem().and_then(|s| s.to_str()).unwrap_or("input").to_string();
    let raw = RawStandoffDoc {
        doc_id,
        text,
        mentions: vec![],
        events: vec![],
        attributes: vec![],
    };
    let doc = to_canonical(&raw, &FallbackAnnotator).or_exit(ExitCode::Data)?;
    Ok(vec![doc])
}

fn predict_sentence(model: &LoadedModel, sent: &Sentence) -> PredSentence {
    let mut entities: Vec<TypedSpan> = Vec::new();
    let mut triggers: Vec<TypedSpan> = Vec::new();
    let mut roles: Vec<(usize, usize, String)> = Vec::new();
    if let Some(pipeline) = &model.pipeline {
        entities = pipeline.predict_entities(sent);
        triggers = pipeline.predict_triggers(sent);
        roles = pipeline.predict_roles(sent, &triggers, &entities);
    }
    let mut events = Vec::new();
    for (ti, trigger) in triggers.iter().enumerate() {
        let arguments: Vec<PredArgument> = roles
            .iter()
            .filter(|(t, _, role)| *t == ti && role != NONE_ROLE)
            .map(|(_, ei, role)| PredArgument {
                role: role.clone(),
                entity_type: entities[*ei].label.clone(),
                start_tok: entities[*ei].start,
                end_tok: entities[*ei].end,
            })
            .collect();
        let mut values = std::collections::BTreeMap::new();
        for kind in PropertyKind::ALL {
            let label = model
                .properties
                .get(kind.name())
                .and_then(|(backbone, head)| {
                    head.predict_label(backbone, sent, trigger).ok().map(|i| {
                        kind.classes()[i].clone()
                    })
                })
                .unwrap_or_else(|| kind.classes()[0].clone());
            values.insert(kind.name(), label);
        }
        events.push(PredEvent {
            event_type: trigger.label.clone(),
            start_tok: trigger.start,
            end_tok: trigger.end,
            polarity: values["polarity"].clone(),
            modality: values["modality"].clone(),
            intensity: values["intensity"].clone(),
            arguments,
        });
    }
    PredSentence {
        tokens: sent.surfaces(),
        entities: entities
            .iter()
            .map(|e| PredEntity {
                entity_type: e.label.clone(),
                start_tok: e.start,
                end_tok: e.end,
            })
            .collect(),
        events,
    }
}
