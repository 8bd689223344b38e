//! Training loops: a joint trainer over any subset of the EE heads (EMD, ED,
//! ARP) sharing one backbone, plus the property-head trainer. Updates are
//! per-sentence Adam steps; all randomness flows from the config seed.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentence;
use crate::graph::GraphError;
use crate::model::NONE_ROLE;
use crate::nn::{cross_entropy, AdamState};

use super::arp::ArpHead;
use super::backbone::Backbone;
use super::property::{PropertyHead, PropertyInstance, PropertyKind};
use super::spans::SpanStrategy;
use super::token_head::{TokenClassifierHead, TokenTask};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("loss diverged (non-finite) at epoch {0}")]
    DivergedLoss(usize),
    #[error("training set contains a single class")]
    SingleClassTrainingSet,
    #[error("graph error: {0}")]
    Graph(#[from] GraphError),
    #[error("encoder error: {0}")]
    Encoder(#[from] crate::features::encoder::EncoderError),
    #[error("bad training data: {0}")]
    Data(String),
}

/// Knobs shared by every trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden_dim: usize,
    pub gcn_dim: usize,
    pub gcn_layers: usize,
    /// Pruning context radius for ARP.
    pub k: usize,
    /// Property-head MLP width.
    pub mlp_dim: usize,
    /// Down-weight the NONE role by the positive/NONE ratio of the
    /// training pairs.
    pub downweight_none: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.02,
            epochs: 30,
            seed: 17,
            hidden_dim: 48,
            gcn_dim: 32,
            gcn_layers: 2,
            k: 1,
            mlp_dim: 32,
            downweight_none: true,
        }
    }
}

impl TrainConfig {
    /// Derives an independent stream for a named consumer without touching
    /// the base seed.
    pub fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x9e3779b97f4a7c15))
    }
}

/// The three EE sub-tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    Emd,
    Ed,
    Arp,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Emd => "EMD",
            Task::Ed => "ED",
            Task::Arp => "ARP",
        }
    }
}

/// One ARP training pair, anchored at span-head tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArpExample {
    pub trigger_tok: usize,
    pub entity_tok: usize,
    pub role_idx: usize,
}

/// Per-sentence training data for a stage.
pub struct StageData<'a> {
    pub sentences: Vec<&'a Sentence>,
    /// ARP pairs per sentence; required when the stage trains ARP.
    pub arp_pairs: Option<Vec<Vec<ArpExample>>>,
}

/// The heads a stage trains jointly (present = trained).
#[derive(Default)]
pub struct StageHeads {
    pub emd: Option<TokenClassifierHead>,
    pub ed: Option<TokenClassifierHead>,
    pub arp: Option<ArpHead>,
}

/// Mean loss per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainCurve {
    pub epoch_losses: Vec<f64>,
}

impl TrainCurve {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

struct TokenHeadOpt {
    w: AdamState,
    b: AdamState,
}

fn token_head_opt(head: &TokenClassifierHead) -> TokenHeadOpt {
    TokenHeadOpt { w: AdamState::new(head.proj.w.len()), b: AdamState::new(head.proj.b.len()) }
}

/// NONE-class weights for the ARP loss: NONE gets `positives / nones`
/// (clamped to [0.05, 1]), every real role weight 1.
fn arp_class_weights(head: &ArpHead, data: &StageData, enabled: bool) -> Vec<f64> {
    let mut weights = vec![1.0; head.n_roles()];
    if !enabled {
        return weights;
    }
    let none_idx = match head.role_index(NONE_ROLE) {
        Some(i) => i,
        None => return weights,
    };
    let mut nones = 0.0f64;
    let mut positives = 0.0f64;
    if let Some(pairs) = &data.arp_pairs {
        for sent_pairs in pairs {
            for p in sent_pairs {
                if p.role_idx == none_idx {
                    nones += 1.0;
                } else {
                    positives += 1.0;
                }
            }
        }
    }
    if nones > 0.0 && positives > 0.0 {
        weights[none_idx] = (positives / nones).clamp(0.05, 1.0);
    }
    weights
}

/// Jointly trains the present heads on the stage data. The per-sentence loss
/// is `sum_t w_t * loss_t`; every parameter (heads and backbone) updates.
pub fn train_stage(
    backbone: &mut Backbone,
    heads: &mut StageHeads,
    data: &StageData,
    weights: &BTreeMap<Task, f64>,
    cfg: &TrainConfig,
) -> Result<TrainCurve, TrainError> {
    if data.sentences.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    if heads.arp.is_some() && data.arp_pairs.is_none() {
        return Err(TrainError::Data("ARP head without pair data".to_string()));
    }
    let weight_of = |task: Task| weights.get(&task).copied().unwrap_or(1.0);

    // Pre-compute gold tag indices per sentence per token head.
    let gold_tags = |head: &TokenClassifierHead| -> Result<Vec<Vec<usize>>, TrainError> {
        data.sentences
            .iter()
            .map(|s| head.gold_tag_indices(s).map_err(TrainError::Data))
            .collect()
    };
    let emd_gold = heads.emd.as_ref().map(gold_tags).transpose()?;
    let ed_gold = heads.ed.as_ref().map(gold_tags).transpose()?;
    let arp_weights =
        heads.arp.as_ref().map(|h| arp_class_weights(h, data, cfg.downweight_none));
    let trees: Vec<_> = data
        .sentences
        .iter()
        .map(|s| s.dep_tree().map_err(TrainError::Graph))
        .collect::<Result<Vec<_>, _>>()?;

    let mut backbone_opt = backbone.new_opt();
    let mut emd_opt = heads.emd.as_ref().map(token_head_opt);
    let mut ed_opt = heads.ed.as_ref().map(token_head_opt);
    let mut arp_opt = heads.arp.as_ref().map(|h| h.new_opt());

    let mut rng = cfg.rng(0x5747); // stage order stream
    let mut order: Vec<usize> = (0..data.sentences.len()).collect();
    let mut curve = TrainCurve { epoch_losses: Vec::with_capacity(cfg.epochs) };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut n_terms = 0usize;
        for &si in &order {
            let sent = data.sentences[si];
            let (hidden, cache) = backbone.forward(sent)?;
            let mut d_hidden = Array2::<f64>::zeros(hidden.dim());
            let mut sentence_loss = 0.0;

            for (head, opt, gold) in [
                (&mut heads.emd, &mut emd_opt, &emd_gold),
                (&mut heads.ed, &mut ed_opt, &ed_gold),
            ] {
                if let (Some(head), Some(opt), Some(gold)) = (head.as_mut(), opt.as_mut(), gold) {
                    let w = weight_of(match head.task {
                        TokenTask::Emd => Task::Emd,
                        TokenTask::Ed => Task::Ed,
                    });
                    let logits = head.logits(&hidden);
                    let (loss, mut d_logits) = cross_entropy(&logits, &gold[si], None);
                    sentence_loss += w * loss;
                    d_logits.mapv_inplace(|v| v * w);
                    let (dx, dw, db) = head.proj.backward(&hidden, &d_logits);
                    d_hidden += &dx;
                    opt.w.step(head.proj.w.iter_mut(), dw.iter(), cfg.lr);
                    opt.b.step(head.proj.b.iter_mut(), db.iter(), cfg.lr);
                }
            }

            if let (Some(arp), Some(opt), Some(pairs_all), Some(class_w)) = (
                heads.arp.as_mut(),
                arp_opt.as_mut(),
                data.arp_pairs.as_ref(),
                arp_weights.as_ref(),
            ) {
                let pairs = &pairs_all[si];
                if !pairs.is_empty() {
                    let w = weight_of(Task::Arp);
                    let scale = w / pairs.len() as f64;
                    let mut grads = arp.zero_grads();
                    let mut pair_loss = 0.0;
                    for pair in pairs {
                        let (logits, pair_cache) =
                            arp.forward_pair(&hidden, &trees[si], pair.trigger_tok, pair.entity_tok)?;
                        let logits_2d = logits.insert_axis(ndarray::Axis(0));
                        let (loss, d_logits) =
                            cross_entropy(&logits_2d, &[pair.role_idx], Some(class_w));
                        pair_loss += loss;
                        let mut d_logits = d_logits.row(0).to_owned();
                        d_logits.mapv_inplace(|v| v * scale);
                        arp.backward_pair(&pair_cache, &d_logits, &mut grads, &mut d_hidden);
                    }
                    sentence_loss += scale * pair_loss;
                    arp.apply_grads(&grads, opt, cfg.lr);
                }
            }

            let grads = backbone.backward(sent, &cache, &d_hidden);
            backbone.apply_grads(&grads, &mut backbone_opt, cfg.lr);

            if !sentence_loss.is_finite() {
                return Err(TrainError::DivergedLoss(epoch));
            }
            epoch_loss += sentence_loss;
            n_terms += 1;
        }
        curve.epoch_losses.push(epoch_loss / n_terms as f64);
    }
    Ok(curve)
}

/// Trains a single BIO token-classification head from scratch on one task.
pub fn train_token_head(
    task: TokenTask,
    labels: Vec<String>,
    sentences: &[&Sentence],
    backbone: &mut Backbone,
    cfg: &TrainConfig,
) -> Result<(TokenClassifierHead, TrainCurve), TrainError> {
    if sentences.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let mut rng = cfg.rng(match task {
        TokenTask::Emd => 0xE4D,
        TokenTask::Ed => 0xED,
    });
    let head = TokenClassifierHead::new(task, labels, backbone.hidden_dim(), &mut rng);
    let mut heads = StageHeads::default();
    let slot = match task {
        TokenTask::Emd => &mut heads.emd,
        TokenTask::Ed => &mut heads.ed,
    };
    *slot = Some(head);
    let data = StageData { sentences: sentences.to_vec(), arp_pairs: None };
    let weights = BTreeMap::new();
    let curve = train_stage(backbone, &mut heads, &data, &weights, cfg)?;
    let head = match task {
        TokenTask::Emd => heads.emd.take(),
        TokenTask::Ed => heads.ed.take(),
    };
    Ok((head.expect("head present"), curve))
}

/// Trains a property classifier over (sentence, trigger, label) instances.
/// The backbone trains jointly with the head.
pub fn train_property_head(
    property: PropertyKind,
    strategy: SpanStrategy,
    sentences: &[&Sentence],
    instances: &[PropertyInstance],
    backbone: &mut Backbone,
    cfg: &TrainConfig,
) -> Result<(PropertyHead, TrainCurve), TrainError> {
    if instances.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let first = instances[0].label_idx;
    if instances.iter().all(|i| i.label_idx == first) {
        return Err(TrainError::SingleClassTrainingSet);
    }
    let trees: Vec<_> = sentences
        .iter()
        .map(|s| s.dep_tree().map_err(TrainError::Graph))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rng = cfg.rng(0x9409 + property as u64);
    let mut head =
        PropertyHead::new(property, strategy, backbone.hidden_dim(), cfg.mlp_dim, &mut rng);
    let mut head_opt = head.new_opt();
    let mut backbone_opt = backbone.new_opt();

    // Group instances by sentence so each sentence encodes once per epoch.
    let mut by_sentence: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, inst) in instances.iter().enumerate() {
        if inst.sentence >= sentences.len() {
            return Err(TrainError::Data(format!(
                "instance references sentence {} of {}",
                inst.sentence,
                sentences.len()
            )));
        }
        by_sentence.entry(inst.sentence).or_default().push(idx);
    }
    let groups: Vec<(usize, Vec<usize>)> = by_sentence.into_iter().collect();

    let mut order: Vec<usize> = (0..groups.len()).collect();
    let mut curve = TrainCurve { epoch_losses: Vec::with_capacity(cfg.epochs) };
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut n_groups = 0usize;
        for &gi in &order {
            let (si, inst_indices) = &groups[gi];
            let sent = sentences[*si];
            let (hidden, cache) = backbone.forward(sent)?;
            let mut d_hidden = Array2::<f64>::zeros(hidden.dim());
            let mut grads = head.zero_grads();
            let mut loss_sum = 0.0;
            let scale = 1.0 / inst_indices.len() as f64;
            for &ii in inst_indices {
                let inst = &instances[ii];
                let (logits, prop_cache) = head.forward(&hidden, &trees[*si], &inst.trigger);
                let logits_2d = logits.insert_axis(ndarray::Axis(0));
                let (loss, d_logits) = cross_entropy(&logits_2d, &[inst.label_idx], None);
                loss_sum += loss;
                let mut d_logits: Array1<f64> = d_logits.row(0).to_owned();
                d_logits.mapv_inplace(|v| v * scale);
                head.backward(&hidden, &prop_cache, &d_logits, &mut grads, &mut d_hidden);
            }
            head.apply_grads(&grads, &mut head_opt, cfg.lr);
            let bb_grads = backbone.backward(sent, &cache, &d_hidden);
            backbone.apply_grads(&bb_grads, &mut backbone_opt, cfg.lr);
            let group_loss = loss_sum * scale;
            if !group_loss.is_finite() {
                return Err(TrainError::DivergedLoss(epoch));
            }
            epoch_loss += group_loss;
            n_groups += 1;
        }
        curve.epoch_losses.push(epoch_loss / n_groups.max(1) as f64);
    }
    Ok((head, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Mention, Token, Trigger};
    use crate::features::encoder::HashEncoder;
    use crate::features::{ChannelConfig, ChannelTables};
    use crate::model::{Intensity, Modality, Polarity};
    use std::sync::Arc;

    fn word_sentence(words: &[&str]) -> Sentence {
        let n = words.len();
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, w)| Token {
                surface: w.to_string(),
                pos: "NN".into(),
                ner: "O".into(),
                dep_label: "dep".into(),
                head: if i + 1 < n { Some(i + 1) } else { None },
            })
            .collect();
        Sentence { tokens, entities: vec![], triggers: vec![], arguments: vec![] }
    }

    /// Tiny separable corpus: "oil" is always B-COMMODITY, nothing else is.
    fn separable_corpus() -> Vec<Sentence> {
        let vocab = ["oil", "rose", "fell", "today", "market", "trading", "gas"];
        let mut out = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..30 {
            let n = 4 + (rand::Rng::random_range(&mut rng, 0..3) as usize);
            let mut words = Vec::new();
            for _ in 0..n {
                words.push(vocab[rand::Rng::random_range(&mut rng, 1..vocab.len())]);
            }
            let pos = rand::Rng::random_range(&mut rng, 0..n);
            words[pos] = "oil";
            let mut s = word_sentence(&words);
            s.entities.push(Mention {
                entity_type: "COMMODITY".into(),
                start_tok: pos,
                end_tok: pos,
            });
            out.push(s);
        }
        out
    }

    fn fresh_backbone(sentences: &[&Sentence], cfg: &TrainConfig) -> Backbone {
        let mut rng = cfg.rng(0xBB);
        let vocabs = ChannelTables::vocabs_from(sentences.iter().copied());
        Backbone::new(
            Arc::new(HashEncoder::new(16, 1)),
            ChannelConfig::default(),
            vocabs,
            cfg.hidden_dim,
            &mut rng,
        )
    }

    #[test]
    fn separable_token_task_reaches_high_accuracy() {
        let corpus = separable_corpus();
        let refs: Vec<&Sentence> = corpus.iter().collect();
        let cfg = TrainConfig { epochs: 25, hidden_dim: 24, ..TrainConfig::default() };
        let mut backbone = fresh_backbone(&refs, &cfg);
        let (head, curve) = train_token_head(
            TokenTask::Emd,
            vec!["COMMODITY".into()],
            &refs,
            &mut backbone,
            &cfg,
        )
        .unwrap();
        let mut correct = 0usize;
        let mut total = 0usize;
        for s in &refs {
            let (hidden, _) = backbone.forward(s).unwrap();
            let pred = head.predict_tag_indices(&hidden);
            let gold = head.gold_tag_indices(s).unwrap();
            correct += pred.iter().zip(&gold).filter(|(a, b)| a == b).count();
            total += gold.len();
        }
        let acc = correct as f64 / total as f64;
        assert!(acc >= 0.99, "token accuracy {acc}");
        // Loss decreased overall.
        assert!(curve.epoch_losses.last().unwrap() < curve.epoch_losses.first().unwrap());
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let corpus = separable_corpus();
        let refs: Vec<&Sentence> = corpus.iter().collect();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let mut backbone = fresh_backbone(&refs, &cfg);
        let digest_before = backbone.params_digest();
        let (head, curve) =
            train_token_head(TokenTask::Emd, vec!["COMMODITY".into()], &refs, &mut backbone, &cfg)
                .unwrap();
        assert!(curve.epoch_losses.is_empty());
        assert_eq!(backbone.params_digest(), digest_before);
        // Head equals a fresh initialization under the same seed.
        let mut rng = cfg.rng(0xE4D);
        let fresh =
            TokenClassifierHead::new(TokenTask::Emd, vec!["COMMODITY".into()], cfg.hidden_dim, &mut rng);
        assert_eq!(head.proj, fresh.proj);
    }

    #[test]
    fn fixed_seed_reproduces_bitwise() {
        let corpus = separable_corpus();
        let refs: Vec<&Sentence> = corpus.iter().collect();
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let run = || {
            let mut backbone = fresh_backbone(&refs, &cfg);
            let (head, curve) = train_token_head(
                TokenTask::Emd,
                vec!["COMMODITY".into()],
                &refs,
                &mut backbone,
                &cfg,
            )
            .unwrap();
            (backbone.params_digest(), head.proj.w, curve.epoch_losses)
        };
        let (d1, w1, l1) = run();
        let (d2, w2, l2) = run();
        assert_eq!(d1, d2);
        assert_eq!(w1, w2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let cfg = TrainConfig::default();
        let sentences: Vec<&Sentence> = vec![];
        let corpus = separable_corpus();
        let refs: Vec<&Sentence> = corpus.iter().collect();
        let mut backbone = fresh_backbone(&refs, &cfg);
        assert!(matches!(
            train_token_head(TokenTask::Emd, vec!["X".into()], &sentences, &mut backbone, &cfg),
            Err(TrainError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn single_class_property_set_is_an_error() {
        let mut s = word_sentence(&["supply", "surplus"]);
        s.triggers.push(Trigger {
            event_type: "OVERSUPPLY".into(),
            start_tok: 1,
            end_tok: 1,
            polarity: Polarity::Positive,
            modality: Modality::Asserted,
            intensity: Intensity::Neutral,
        });
        let sents = vec![&s];
        let cfg = TrainConfig::default();
        let mut backbone = fresh_backbone(&sents, &cfg);
        let instances = crate::tasks::property::property_instances(&sents, PropertyKind::Polarity);
        assert!(matches!(
            train_property_head(
                PropertyKind::Polarity,
                SpanStrategy::SelfAttentiveSpan,
                &sents,
                &instances,
                &mut backbone,
                &cfg,
            ),
            Err(TrainError::SingleClassTrainingSet)
        ));
    }

    #[test]
    fn cue_word_polarity_is_separable_with_attentive_span() {
        // "never" anywhere in the sentence flips polarity to NEGATIVE.
        let mut sentences = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let fillers = ["market", "supply", "today", "report", "trading", "barrels"];
        for i in 0..40 {
            let negate = i % 2 == 0;
            let mut words: Vec<&str> = vec![];
            if negate {
                words.push("never");
            }
            for _ in 0..3 {
                words.push(fillers[rand::Rng::random_range(&mut rng, 0..fillers.len())]);
            }
            words.push("cut"); // trigger word, always last
            let trig = words.len() - 1;
            let mut s = word_sentence(&words);
            s.triggers.push(Trigger {
                event_type: "CAUSE_MOVEMENT_DOWN_LOSS".into(),
                start_tok: trig,
                end_tok: trig,
                polarity: if negate { Polarity::Negative } else { Polarity::Positive },
                modality: Modality::Asserted,
                intensity: Intensity::Neutral,
            });
            sentences.push(s);
        }
        let refs: Vec<&Sentence> = sentences.iter().collect();
        let cfg = TrainConfig { epochs: 40, hidden_dim: 24, ..TrainConfig::default() };
        let mut backbone = fresh_backbone(&refs, &cfg);
        let instances = crate::tasks::property::property_instances(&refs, PropertyKind::Polarity);
        let (head, _) = train_property_head(
            PropertyKind::Polarity,
            SpanStrategy::SelfAttentiveSpan,
            &refs,
            &instances,
            &mut backbone,
            &cfg,
        )
        .unwrap();
        let mut correct = 0;
        for inst in &instances {
            let pred = head
                .predict_label(&backbone, refs[inst.sentence], &inst.trigger)
                .unwrap();
            if pred == inst.label_idx {
                correct += 1;
            }
        }
        let acc = correct as f64 / instances.len() as f64;
        assert!(acc >= 0.99, "polarity accuracy {acc}");
    }
}
