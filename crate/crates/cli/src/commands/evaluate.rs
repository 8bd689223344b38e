use std::path::Path;

use anyhow::anyhow;

use petrel_core::corpus::{Corpus, Sentence};
use petrel_core::eval::{build_report, build_span_report, ConfusionMatrix, SpanCounts};
use petrel_core::model::{encode_bio, NONE_ROLE};
use petrel_core::model_io::load_model;
use petrel_core::tasks::property::property_instances;
use petrel_core::tasks::PropertyKind;
use petrel_core::transfer::property_confusion;

use super::{fail, CliResult, ExitCode, ExitCtx};

/// Evaluates a saved model against the gold annotation of a corpus; writes
/// one report per available task.
pub fn run(model_dir: &Path, corpus_path: &Path, out: Option<&Path>) -> CliResult {
    let model = load_model(model_dir).or_exit(ExitCode::Model)?;
    let corpus = Corpus::load(corpus_path).or_exit(ExitCode::Data)?;
    let sentences: Vec<&Sentence> = corpus.sentences().collect();
    if sentences.is_empty() {
        return fail(ExitCode::Data, anyhow!("corpus has no sentences"));
    }
    let out_dir = out.unwrap_or(model_dir);
    std::fs::create_dir_all(out_dir).or_exit(ExitCode::Data)?;

    let mut reports = Vec::new();
    if let Some(pipeline) = &model.pipeline {
        if let Some((backbone, head)) = pipeline.emd() {
            let mut counts = SpanCounts::default();
            let classes: Vec<String> =
                (0..head.tags.size()).map(|i| head.tags.tag(i).unwrap().to_string()).collect();
            let mut cm = ConfusionMatrix::new(classes);
            for sent in &sentences {
                let gold = sent.entity_spans();
                let (hidden, _) = backbone.forward(sent).or_exit(ExitCode::Data)?;
                counts.add_sentence(&gold, &head.predict_spans_from_hidden(&hidden));
                let gold_tags = encode_bio(&gold, sent.len())
                    .map_err(|e| anyhow!(e.to_string()))
                    .or_exit(ExitCode::Data)?;
                let pred = head.predict_tag_indices(&hidden);
                for (tok, tag) in gold_tags.iter().enumerate() {
                    if let Some(gi) = head.tags.index(tag) {
                        cm.add(gi, pred[tok]);
                    }
                }
            }
            reports.push(build_span_report("EMD", &[(counts, cm)]).or_exit(ExitCode::Data)?);
        }
        if let Some((backbone, head)) = pipeline.ed() {
            let mut counts = SpanCounts::default();
            let classes: Vec<String> =
                (0..head.tags.size()).map(|i| head.tags.tag(i).unwrap().to_string()).collect();
            let mut cm = ConfusionMatrix::new(classes);
            for sent in &sentences {
                let gold = sent.trigger_spans();
                let (hidden, _) = backbone.forward(sent).or_exit(ExitCode::Data)?;
                counts.add_sentence(&gold, &head.predict_spans_from_hidden(&hidden));
                let gold_tags = encode_bio(&gold, sent.len())
                    .map_err(|e| anyhow!(e.to_string()))
                    .or_exit(ExitCode::Data)?;
                let pred = head.predict_tag_indices(&hidden);
                for (tok, tag) in gold_tags.iter().enumerate() {
                    if let Some(gi) = head.tags.index(tag) {
                        cm.add(gi, pred[tok]);
                    }
                }
            }
            reports.push(build_span_report("ED", &[(counts, cm)]).or_exit(ExitCode::Data)?);
        }
        if pipeline.arp().is_some() {
            let roles = pipeline.labels.roles.clone();
            let none_idx = roles.iter().position(|r| r == NONE_ROLE).unwrap_or(0);
            let mut cm = ConfusionMatrix::new(roles.clone());
            for sent in &sentences {
                let triggers = pipeline.predict_triggers(sent);
                let entities = pipeline.predict_entities(sent);
                let mut gold = std::collections::BTreeMap::new();
                for link in &sent.arguments {
                    gold.insert(
                        (
                            sent.triggers[link.trigger_idx].span(),
                            sent.entities[link.entity_idx].span(),
                        ),
                        link.role.clone(),
                    );
                }
                for (ti, ei, predicted) in pipeline.predict_roles(sent, &triggers, &entities) {
                    let gold_idx = gold
                        .get(&(triggers[ti].clone(), entities[ei].clone()))
                        .and_then(|r| roles.iter().position(|x| x == r))
                        .unwrap_or(none_idx);
                    let pred_idx =
                        roles.iter().position(|r| *r == predicted).unwrap_or(none_idx);
                    cm.add(gold_idx, pred_idx);
                }
            }
            reports.push(build_report("ARP", &[cm]).or_exit(ExitCode::Data)?);
        }
    }
    for kind in PropertyKind::ALL {
        if let Some((backbone, head)) = model.properties.get(kind.name()) {
            let instances = property_instances(&sentences, kind);
            if instances.is_empty() {
                continue;
            }
            let cm = property_confusion(head, backbone, &sentences, &instances, kind)
                .map_err(|e| anyhow!(e.to_string()))
                .or_exit(ExitCode::Data)?;
            reports.push(build_report(kind.name(), &[cm]).or_exit(ExitCode::Data)?);
        }
    }

    for report in &reports {
        print!("{}", report.text_table());
        std::fs::write(
            out_dir.join(format!("eval-{}.json", report.task)),
            serde_json::to_string_pretty(report).or_exit(ExitCode::Data)?,
        )
        .or_exit(ExitCode::Data)?;
    }
    if reports.is_empty() {
        return fail(ExitCode::Model, anyhow!("model directory holds no evaluable components"));
    }
    Ok(())
}
