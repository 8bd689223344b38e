//! Transfer orchestration: the five event-extraction task setups (single
//! task, full multi-task, full sequential, and the two MTL/STL
//! combinations), joint losses, source-label alignment, and cross-domain
//! sequential transfer for the property classifiers.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::annotator::LinguisticAnnotator;
use crate::corpus::sources::{SourceKind, SourceSentenceSet};
use crate::corpus::Sentence;
use crate::eval::{
    build_report, build_span_report, ConfusionMatrix, EvalError, FoldSplit, MetricsReport,
    SpanCounts,
};
use crate::features::encoder::ContextualEncoder;
use crate::features::{ChannelConfig, ChannelTables};
use crate::model::{encode_bio, LabelVocab, TypedSpan, NONE_ROLE};
use crate::nn::argmax;
use crate::tasks::property::{property_instances, PropertyInstance, PropertyKind};
use crate::tasks::trainer::{
    train_stage, ArpExample, StageData, StageHeads, Task, TrainConfig, TrainCurve, TrainError,
};
use crate::tasks::{ArpHead, Backbone, PropertyHead, SpanStrategy, TokenClassifierHead, TokenTask};

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("loss weights must be positive")]
    NonPositiveWeight,
    #[error("stage {stage} failed: {source}")]
    StageFailure { stage: usize, source: TrainError },
    #[error("source {kind:?} cannot provide {target:?} labels")]
    IncompatibleSource { kind: SourceKind, target: PropertyKind },
    #[error("source has {len} sentences, below the floor of {floor}")]
    SourceTooSmall { len: usize, floor: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{0}")]
    Data(String),
}

/// The five experiment setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetupKind {
    Single,
    FullMtl,
    FullStl,
    Combo1,
    Combo2,
}

impl SetupKind {
    pub const ALL: [SetupKind; 5] = [
        SetupKind::Single,
        SetupKind::FullMtl,
        SetupKind::FullStl,
        SetupKind::Combo1,
        SetupKind::Combo2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SetupKind::Single => "single",
            SetupKind::FullMtl => "full-mtl",
            SetupKind::FullStl => "full-stl",
            SetupKind::Combo1 => "combo1",
            SetupKind::Combo2 => "combo2",
        }
    }

    pub fn parse(name: &str) -> Option<SetupKind> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }
}

/// Loss weights for one joint stage; missing tasks default to 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JointLossSpec {
    pub weights: BTreeMap<Task, f64>,
}

impl JointLossSpec {
    pub fn new(weights: BTreeMap<Task, f64>) -> Result<Self, TransferError> {
        if weights.values().any(|w| *w <= 0.0 || !w.is_finite()) {
            return Err(TransferError::NonPositiveWeight);
        }
        Ok(JointLossSpec { weights })
    }

    pub fn uniform() -> Self {
        JointLossSpec { weights: BTreeMap::new() }
    }

    pub fn weight(&self, task: Task) -> f64 {
        self.weights.get(&task).copied().unwrap_or(1.0)
    }
}

/// Weighted sum of per-task losses: `sum_t w_t * loss_t`.
pub fn joint_loss(
    losses: &BTreeMap<Task, f64>,
    spec: &JointLossSpec,
) -> Result<f64, TransferError> {
    let mut total = 0.0;
    for (task, loss) in losses {
        if !loss.is_finite() || *loss < 0.0 {
            return Err(TransferError::NonFiniteLoss);
        }
        total += spec.weight(*task) * loss;
    }
    if !total.is_finite() {
        return Err(TransferError::NonFiniteLoss);
    }
    Ok(total)
}

/// One stage: the tasks trained jointly plus their loss weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub tasks: Vec<Task>,
    pub loss: JointLossSpec,
}

impl Stage {
    fn of(tasks: &[Task]) -> Stage {
        Stage { tasks: tasks.to_vec(), loss: JointLossSpec::uniform() }
    }
}

/// A declarative task setup: ordered stages plus the backbone-handoff rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSetup {
    pub kind: SetupKind,
    pub stages: Vec<Stage>,
    /// Carry backbone parameters across stages (false only for the
    /// from-scratch single-task baseline).
    pub carry_backbone: bool,
}

impl TaskSetup {
    /// Builds the stage list for a setup. `beta` weights the ED loss in the
    /// combination stages. With `literal_eq4` the first combination trains
    /// the EMD+ED joint stage exactly as the printed loss formula
    /// (`loss_EMD + beta * loss_ED`) and ARP in its own stage.
    pub fn new(kind: SetupKind, beta: f64, literal_eq4: bool) -> Result<Self, TransferError> {
        let beta_spec = |task: Task| -> Result<JointLossSpec, TransferError> {
            let mut weights = BTreeMap::new();
            weights.insert(task, beta);
            JointLossSpec::new(weights)
        };
        let stages = match kind {
            SetupKind::Single | SetupKind::FullStl => {
                vec![Stage::of(&[Task::Emd]), Stage::of(&[Task::Ed]), Stage::of(&[Task::Arp])]
            }
            SetupKind::FullMtl => vec![Stage::of(&[Task::Emd, Task::Ed, Task::Arp])],
            SetupKind::Combo1 => {
                if literal_eq4 {
                    vec![
                        Stage {
                            tasks: vec![Task::Emd, Task::Ed],
                            loss: beta_spec(Task::Ed)?,
                        },
                        Stage::of(&[Task::Arp]),
                    ]
                } else {
                    vec![
                        Stage::of(&[Task::Emd]),
                        Stage { tasks: vec![Task::Ed, Task::Arp], loss: beta_spec(Task::Ed)? },
                    ]
                }
            }
            SetupKind::Combo2 => {
                vec![Stage::of(&[Task::Emd, Task::Ed]), Stage::of(&[Task::Arp])]
            }
        };
        Ok(TaskSetup { kind, stages, carry_backbone: kind != SetupKind::Single })
    }

    /// Arbitrary stage list (used by tests and ablations).
    pub fn custom(kind: SetupKind, stages: Vec<Stage>, carry_backbone: bool) -> Self {
        TaskSetup { kind, stages, carry_backbone }
    }
}

/// Label inventories the EE heads train over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EeLabels {
    pub entity_types: Vec<String>,
    pub event_types: Vec<String>,
    pub roles: Vec<String>,
}

impl EeLabels {
    pub fn from_vocab(vocab: &LabelVocab) -> Self {
        EeLabels {
            entity_types: vocab.entity_types.clone(),
            event_types: vocab.event_types.clone(),
            roles: vocab.argument_roles.clone(),
        }
    }
}

/// A stage after training: its backbone snapshot and heads.
pub struct TrainedStage {
    pub tasks: Vec<Task>,
    pub backbone: Backbone,
    pub heads: StageHeads,
    pub curve: TrainCurve,
}

/// The trained event-extraction pipeline: per-stage models, each task served
/// by the backbone snapshot of the stage that trained it.
pub struct Pipeline {
    pub stages: Vec<TrainedStage>,
    pub labels: EeLabels,
}

impl Pipeline {
    fn stage_of(&self, task: Task) -> Option<&TrainedStage> {
        self.stages.iter().find(|s| s.tasks.contains(&task))
    }

    pub fn emd(&self) -> Option<(&Backbone, &TokenClassifierHead)> {
        let stage = self.stage_of(Task::Emd)?;
        Some((&stage.backbone, stage.heads.emd.as_ref()?))
    }

    pub fn ed(&self) -> Option<(&Backbone, &TokenClassifierHead)> {
        let stage = self.stage_of(Task::Ed)?;
        Some((&stage.backbone, stage.heads.ed.as_ref()?))
    }

    pub fn arp(&self) -> Option<(&Backbone, &ArpHead)> {
        let stage = self.stage_of(Task::Arp)?;
        Some((&stage.backbone, stage.heads.arp.as_ref()?))
    }

    pub fn predict_entities(&self, sent: &Sentence) -> Vec<TypedSpan> {
        match self.emd() {
            Some((backbone, head)) => head.predict_spans(backbone, sent),
            None => Vec::new(),
        }
    }

    pub fn predict_triggers(&self, sent: &Sentence) -> Vec<TypedSpan> {
        match self.ed() {
            Some((backbone, head)) => head.predict_spans(backbone, sent),
            None => Vec::new(),
        }
    }

    /// Role for every (trigger, entity) candidate; NONE rows included.
    pub fn predict_roles(
        &self,
        sent: &Sentence,
        triggers: &[TypedSpan],
        entities: &[TypedSpan],
    ) -> Vec<(usize, usize, String)> {
        let (backbone, head) = match self.arp() {
            Some(x) => x,
            None => return Vec::new(),
        };
        let (hidden, _) = match backbone.forward(sent) {
            Ok(h) => h,
            Err(e) => {
                log::error!("encoder failed during role prediction: {e}");
                return Vec::new();
            }
        };
        let tree = match sent.dep_tree() {
            Ok(t) => t,
            Err(e) => {
                log::error!("invalid tree during role prediction: {e}");
                return Vec::new();
            }
        };
        let mut out = Vec::new();
        for (ti, trigger) in triggers.iter().enumerate() {
            for (ei, entity) in entities.iter().enumerate() {
                match head.forward_pair(&hidden, &tree, trigger.start, entity.start) {
                    Ok((logits, _)) => {
                        let idx = argmax(logits.as_slice().expect("contiguous"));
                        out.push((ti, ei, head.roles[idx].clone()));
                    }
                    Err(e) => log::warn!("skipping pair ({ti},{ei}): {e}"),
                }
            }
        }
        out
    }
}

/// Run-level configuration on top of the per-head training knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub beta: f64,
    pub literal_eq4: bool,
    /// Worker threads for fold-level parallelism.
    pub jobs: usize,
    /// Also train a final pipeline on the full sentence set.
    pub train_final: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            beta: 2.0,
            literal_eq4: false,
            jobs: 1,
            train_final: true,
        }
    }
}

/// Per-fold evaluation artifacts for the three sub-tasks.
struct FoldEval {
    emd: (SpanCounts, ConfusionMatrix),
    ed: (SpanCounts, ConfusionMatrix),
    arp: Option<ConfusionMatrix>,
}

/// Outcome of one setup run: per-task aggregated reports plus the pipeline
/// trained on the full data.
pub struct SetupOutcome {
    pub reports: BTreeMap<Task, MetricsReport>,
    pub final_pipeline: Option<Pipeline>,
}

/// Fresh backbone over the tag vocabularies of the given sentences.
pub fn fresh_backbone(
    sentences: &[&Sentence],
    encoder: Arc<dyn ContextualEncoder>,
    channel_cfg: &ChannelConfig,
    cfg: &TrainConfig,
) -> Backbone {
    let mut rng = cfg.rng(0xBB);
    let vocabs = ChannelTables::vocabs_from(sentences.iter().copied());
    Backbone::new(encoder, channel_cfg.clone(), vocabs, cfg.hidden_dim, &mut rng)
}

fn head_salt(task: Task) -> u64 {
    match task {
        Task::Emd => 0xE4D,
        Task::Ed => 0xED,
        Task::Arp => 0xA49,
    }
}

/// Executes the stages of a setup over a training set, consuming upstream
/// predictions for downstream stages, and returns the trained pipeline.
pub fn train_pipeline(
    setup: &TaskSetup,
    train_sentences: &[&Sentence],
    labels: &EeLabels,
    encoder: Arc<dyn ContextualEncoder>,
    channel_cfg: &ChannelConfig,
    cfg: &RunConfig,
) -> Result<Pipeline, TransferError> {
    let mut pipeline = Pipeline { stages: Vec::new(), labels: labels.clone() };
    let mut backbone: Option<Backbone> = None;

    for (stage_idx, stage) in setup.stages.iter().enumerate() {
        let mut current = match (&backbone, setup.carry_backbone) {
            (Some(prev), true) => prev.clone_state(),
            _ => fresh_backbone(train_sentences, Arc::clone(&encoder), channel_cfg, &cfg.train),
        };

        let mut heads = StageHeads::default();
        for task in &stage.tasks {
            let mut rng = cfg.train.rng(head_salt(*task));
            match task {
                Task::Emd => {
                    heads.emd = Some(TokenClassifierHead::new(
                        TokenTask::Emd,
                        labels.entity_types.clone(),
                        current.hidden_dim(),
                        &mut rng,
                    ));
                }
                Task::Ed => {
                    heads.ed = Some(TokenClassifierHead::new(
                        TokenTask::Ed,
                        labels.event_types.clone(),
                        current.hidden_dim(),
                        &mut rng,
                    ));
                }
                Task::Arp => {
                    heads.arp = Some(ArpHead::new(
                        labels.roles.clone(),
                        current.hidden_dim(),
                        cfg.train.gcn_dim,
                        cfg.train.gcn_layers,
                        cfg.train.k,
                        &mut rng,
                    ));
                }
            }
        }

        // ARP training pairs: entities/triggers come from upstream
        // predictions when an upstream model exists, else from gold.
        let arp_pairs = if stage.tasks.contains(&Task::Arp) {
            Some(build_arp_pairs(train_sentences, labels, &pipeline)?)
        } else {
            None
        };

        let data = StageData { sentences: train_sentences.to_vec(), arp_pairs };
        let curve = train_stage(&mut current, &mut heads, &data, &stage.loss.weights, &cfg.train)
            .map_err(|source| TransferError::StageFailure { stage: stage_idx, source })?;

        backbone = Some(current.clone_state());
        pipeline.stages.push(TrainedStage {
            tasks: stage.tasks.clone(),
            backbone: current,
            heads,
            curve,
        });
    }
    Ok(pipeline)
}

/// Builds per-sentence ARP training pairs. Anchor spans come from upstream
/// EMD/ED predictions when those heads are already trained; the pair label
/// is the gold role on exact span+type match, NONE otherwise.
fn build_arp_pairs(
    sentences: &[&Sentence],
    labels: &EeLabels,
    pipeline: &Pipeline,
) -> Result<Vec<Vec<ArpExample>>, TransferError> {
    let role_index = |role: &str| -> Result<usize, TransferError> {
        labels
            .roles
            .iter()
            .position(|r| r == role)
            .ok_or_else(|| TransferError::Data(format!("role {role:?} outside inventory")))
    };
    let none_idx = role_index(NONE_ROLE)?;
    let mut out = Vec::with_capacity(sentences.len());
    for sent in sentences {
        let triggers = match pipeline.ed() {
            Some((backbone, head)) => head.predict_spans(backbone, sent),
            None => sent.trigger_spans(),
        };
        let entities = match pipeline.emd() {
            Some((backbone, head)) => head.predict_spans(backbone, sent),
            None => sent.entity_spans(),
        };
        // Gold link lookup by (trigger span, entity span).
        let mut gold: BTreeMap<(TypedSpan, TypedSpan), &str> = BTreeMap::new();
        for link in &sent.arguments {
            gold.insert(
                (sent.triggers[link.trigger_idx].span(), sent.entities[link.entity_idx].span()),
                link.role.as_str(),
            );
        }
        let mut pairs = Vec::with_capacity(triggers.len() * entities.len());
        for trigger in &triggers {
            for entity in &entities {
                let role_idx = match gold.get(&(trigger.clone(), entity.clone())) {
                    Some(role) => role_index(role)?,
                    None => none_idx,
                };
                pairs.push(ArpExample {
                    trigger_tok: trigger.start,
                    entity_tok: entity.start,
                    role_idx,
                });
            }
        }
        out.push(pairs);
    }
    Ok(out)
}

/// Evaluates a trained pipeline on held-out sentences.
fn evaluate_pipeline(
    pipeline: &Pipeline,
    test_sentences: &[&Sentence],
    labels: &EeLabels,
) -> Result<FoldEval, TransferError> {
    let emd_head = pipeline.emd();
    let ed_head = pipeline.ed();

    let tag_confusion = |head: &TokenClassifierHead,
                         backbone: &Backbone,
                         gold_of: &dyn Fn(&Sentence) -> Vec<TypedSpan>|
     -> Result<(SpanCounts, ConfusionMatrix), TransferError> {
        let classes: Vec<String> =
            (0..head.tags.size()).map(|i| head.tags.tag(i).unwrap().to_string()).collect();
        let mut cm = ConfusionMatrix::new(classes);
        let mut counts = SpanCounts::default();
        for sent in test_sentences {
            let gold_spans = gold_of(sent);
            let gold_tags = encode_bio(&gold_spans, sent.len())
                .map_err(|e| TransferError::Data(e.to_string()))?;
            let (hidden, _) = backbone.forward(sent).map_err(TrainError::Encoder)?;
            let pred_indices = head.predict_tag_indices(&hidden);
            for (tok, gold_tag) in gold_tags.iter().enumerate() {
                let gi = head.tags.index(gold_tag).ok_or_else(|| {
                    TransferError::Data(format!("gold tag {gold_tag} outside head vocabulary"))
                })?;
                cm.add(gi, pred_indices[tok]);
            }
            counts.add_sentence(&gold_spans, &head.predict_spans_from_hidden(&hidden));
        }
        Ok((counts, cm))
    };

    let emd = match emd_head {
        Some((backbone, head)) => tag_confusion(head, backbone, &|s| s.entity_spans())?,
        None => (SpanCounts::default(), ConfusionMatrix::new(vec!["O".into()])),
    };
    let ed = match ed_head {
        Some((backbone, head)) => tag_confusion(head, backbone, &|s| s.trigger_spans())?,
        None => (SpanCounts::default(), ConfusionMatrix::new(vec!["O".into()])),
    };

    let arp = if pipeline.arp().is_some() {
        let mut cm = ConfusionMatrix::new(labels.roles.clone());
        let none_idx = labels
            .roles
            .iter()
            .position(|r| r == NONE_ROLE)
            .ok_or_else(|| TransferError::Data("role inventory lacks NONE".into()))?;
        for sent in test_sentences {
            let triggers = pipeline.predict_triggers(sent);
            let entities = pipeline.predict_entities(sent);
            let mut gold: BTreeMap<(TypedSpan, TypedSpan), &str> = BTreeMap::new();
            for link in &sent.arguments {
                gold.insert(
                    (
                        sent.triggers[link.trigger_idx].span(),
                        sent.entities[link.entity_idx].span(),
                    ),
                    link.role.as_str(),
                );
            }
            for (ti, ei, predicted) in pipeline.predict_roles(sent, &triggers, &entities) {
                let gold_idx = match gold.get(&(triggers[ti].clone(), entities[ei].clone())) {
                    Some(role) => labels.roles.iter().position(|r| r == role).unwrap_or(none_idx),
                    None => none_idx,
                };
                let pred_idx =
                    labels.roles.iter().position(|r| *r == predicted).unwrap_or(none_idx);
                cm.add(gold_idx, pred_idx);
            }
        }
        Some(cm)
    } else {
        None
    };

    Ok(FoldEval { emd, ed, arp })
}

/// Runs a task setup with cross-validation: trains the stages per fold,
/// evaluates each fold's test split, and aggregates one report per task.
pub fn run_setup(
    setup: &TaskSetup,
    sentences: &[&Sentence],
    folds: &FoldSplit,
    labels: &EeLabels,
    encoder: Arc<dyn ContextualEncoder>,
    channel_cfg: &ChannelConfig,
    cfg: &RunConfig,
) -> Result<SetupOutcome, TransferError> {
    // Fold jobs share the encoder; serialize it when it demands that.
    let encoder = crate::features::encoder::ensure_concurrent(encoder);
    let fold_ids: Vec<usize> = (0..folds.k()).collect();
    let fold_evals = parallel_map(cfg.jobs, &fold_ids, |&fold| {
        let (train_idx, test_idx) = folds.split(fold);
        let train: Vec<&Sentence> = train_idx.iter().map(|&i| sentences[i]).collect();
        let test: Vec<&Sentence> = test_idx.iter().map(|&i| sentences[i]).collect();
        let mut fold_cfg = cfg.clone();
        fold_cfg.train.seed =
            cfg.train.seed ^ (fold as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15);
        let pipeline = train_pipeline(
            setup,
            &train,
            labels,
            Arc::clone(&encoder),
            channel_cfg,
            &fold_cfg,
        )?;
        evaluate_pipeline(&pipeline, &test, labels)
    });
    let mut emd_folds = Vec::new();
    let mut ed_folds = Vec::new();
    let mut arp_folds = Vec::new();
    for eval in fold_evals {
        let eval = eval?;
        emd_folds.push(eval.emd);
        ed_folds.push(eval.ed);
        if let Some(arp) = eval.arp {
            arp_folds.push(arp);
        }
    }
    let mut reports = BTreeMap::new();
    let trains_task =
        |task: Task| setup.stages.iter().any(|s| s.tasks.contains(&task));
    if trains_task(Task::Emd) {
        reports.insert(Task::Emd, build_span_report("EMD", &emd_folds)?);
    }
    if trains_task(Task::Ed) {
        reports.insert(Task::Ed, build_span_report("ED", &ed_folds)?);
    }
    if !arp_folds.is_empty() {
        reports.insert(Task::Arp, build_report("ARP", &arp_folds)?);
    }

    let final_pipeline = if cfg.train_final {
        Some(train_pipeline(setup, sentences, labels, encoder, channel_cfg, cfg)?)
    } else {
        None
    };
    Ok(SetupOutcome { reports, final_pipeline })
}

/// Maps `f` over `items` with at most `jobs` worker threads, preserving
/// order. Results are identical to the serial run because every item is
/// independent and carries its own seed.
pub fn parallel_map<T: Sync, R: Send>(
    jobs: usize,
    items: &[T],
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let slots_mutex = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots_mutex.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|s| s.expect("all slots filled")).collect()
}

/// Sentence-level binary labels aligned from a source corpus: negation maps
/// to polarity (cue or label present means NEGATIVE), uncertainty maps to
/// modality (present means OTHER).
pub fn align_source_labels(
    src: &SourceSentenceSet,
    target: PropertyKind,
) -> Result<Vec<(String, usize)>, TransferError> {
    let incompatible = || TransferError::IncompatibleSource { kind: src.kind, target };
    match target {
        PropertyKind::Polarity if src.kind.has_negation() => src
            .sentences
            .iter()
            .map(|s| {
                let negated = s.is_negated().ok_or_else(incompatible)?;
                Ok((s.text.clone(), usize::from(negated)))
            })
            .collect(),
        PropertyKind::Modality if src.kind.has_uncertainty() => src
            .sentences
            .iter()
            .map(|s| {
                let uncertain = s.is_uncertain().ok_or_else(incompatible)?;
                Ok((s.text.clone(), usize::from(uncertain)))
            })
            .collect(),
        _ => Err(incompatible()),
    }
}

/// Declarative description of one cross-domain sequential transfer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    pub source: SourceKind,
    pub target_property: PropertyKind,
    pub strategy: SpanStrategy,
    pub phase1_epochs: usize,
    /// Fraction of the source held out for checkpoint selection.
    pub val_fraction: f64,
    /// Minimum usable source size.
    pub min_source: usize,
    /// Keep backbone parameters frozen during target fine-tuning.
    pub freeze_backbone: bool,
}

impl TransferPlan {
    pub fn new(source: SourceKind, target_property: PropertyKind) -> Self {
        TransferPlan {
            source,
            target_property,
            strategy: SpanStrategy::SelfAttentiveSpan,
            phase1_epochs: 10,
            val_fraction: 0.2,
            min_source: 10,
            freeze_backbone: false,
        }
    }
}

/// Outcome of a sequential transfer: the aggregated target report plus the
/// model fine-tuned on the full target data.
pub struct TransferOutcome {
    pub report: MetricsReport,
    pub backbone: Backbone,
    pub head: PropertyHead,
}

/// Cross-domain sequential transfer: phase 1 trains on the aligned source
/// with best-validation-epoch checkpointing; phase 2 fine-tunes everything
/// on each target fold and reports target metrics.
#[allow(clippy::too_many_arguments)]
pub fn sequential_transfer(
    plan: &TransferPlan,
    source_set: &SourceSentenceSet,
    target_sentences: &[&Sentence],
    target_folds: &FoldSplit,
    annotator: &dyn LinguisticAnnotator,
    encoder: Arc<dyn ContextualEncoder>,
    channel_cfg: &ChannelConfig,
    cfg: &TrainConfig,
) -> Result<TransferOutcome, TransferError> {
    let aligned = align_source_labels(source_set, plan.target_property)?;
    if aligned.len() < plan.min_source {
        return Err(TransferError::SourceTooSmall {
            len: aligned.len(),
            floor: plan.min_source,
        });
    }

    // Annotate source text into sentences; the "event" is the whole
    // sentence, so the trigger span covers every token.
    let mut source_sentences: Vec<Sentence> = Vec::with_capacity(aligned.len());
    let mut source_labels: Vec<usize> = Vec::with_capacity(aligned.len());
    for (text, label) in &aligned {
        let doc = crate::corpus::standoff::RawStandoffDoc {
            doc_id: "source".to_string(),
            text: text.clone(),
            mentions: vec![],
            events: vec![],
            attributes: vec![],
        };
        let parsed = crate::corpus::to_canonical(&doc, annotator)
            .map_err(|e| TransferError::Data(e.to_string()))?;
        for sent in parsed.sentences {
            source_sentences.push(sent);
            source_labels.push(*label);
        }
    }
    if source_sentences.len() < plan.min_source {
        return Err(TransferError::SourceTooSmall {
            len: source_sentences.len(),
            floor: plan.min_source,
        });
    }

    // Tag vocabularies must cover source and target sentences alike.
    let all_sentences: Vec<&Sentence> =
        source_sentences.iter().chain(target_sentences.iter().copied()).collect();
    let template_backbone = fresh_backbone(&all_sentences, Arc::clone(&encoder), channel_cfg, cfg);

    // Deterministic source train/val split.
    let n_val = ((source_sentences.len() as f64 * plan.val_fraction).round() as usize)
        .clamp(1, source_sentences.len() - 1);
    let mut order: Vec<usize> = (0..source_sentences.len()).collect();
    {
        use rand::seq::SliceRandom;
        let mut rng = cfg.rng(0x50A);
        order.shuffle(&mut rng);
    }
    let (val_idx, train_idx) = order.split_at(n_val);
    let src_refs: Vec<&Sentence> = source_sentences.iter().collect();
    let whole_span =
        |s: &Sentence| TypedSpan::new(0, s.len().saturating_sub(1), "SENTENCE".to_string());
    let instances_of = |idx: &[usize]| -> Vec<PropertyInstance> {
        idx.iter()
            .map(|&i| PropertyInstance {
                sentence: i,
                trigger: whole_span(&source_sentences[i]),
                label_idx: source_labels[i],
            })
            .collect()
    };
    let train_instances = instances_of(train_idx);
    let val_instances = instances_of(val_idx);

    // Phase 1 with per-epoch checkpoint selection on source validation.
    let mut phase1_backbone = template_backbone.clone_state();
    let mut session = PropertySession::new(
        plan.target_property,
        plan.strategy,
        &src_refs,
        &train_instances,
        &phase1_backbone,
        cfg,
    )?;
    let mut best: Option<(f64, PropertyHead, Backbone)> = None;
    for _ in 0..plan.phase1_epochs {
        session.run_epoch(&mut phase1_backbone, true)?;
        let score = eval_property(
            &session.head,
            &phase1_backbone,
            &src_refs,
            &val_instances,
            plan.target_property.n_classes(),
        )?;
        let better = best.as_ref().is_none_or(|(b, _, _)| score > *b);
        if better {
            best = Some((score, session.head.clone(), phase1_backbone.clone_state()));
        }
    }
    let (_, phase1_head, phase1_backbone) = match best {
        Some(b) => b,
        // Zero phase-1 epochs degenerates to baseline training.
        None => (0.0, session.head.clone(), template_backbone.clone_state()),
    };

    // Phase 2: fine-tune on each target fold, evaluate on its test split.
    let target_instances = property_instances(target_sentences, plan.target_property);
    let mut fold_cms = Vec::new();
    for fold in 0..target_folds.k() {
        let (train_idx, test_idx) = target_folds.split(fold);
        let in_fold = |set: &[usize], inst: &PropertyInstance| set.contains(&inst.sentence);
        let train_inst: Vec<PropertyInstance> =
            target_instances.iter().filter(|i| in_fold(&train_idx, i)).cloned().collect();
        let test_inst: Vec<PropertyInstance> =
            target_instances.iter().filter(|i| in_fold(&test_idx, i)).cloned().collect();
        if train_inst.is_empty() || test_inst.is_empty() {
            continue;
        }
        let mut backbone = phase1_backbone.clone_state();
        let mut head = phase1_head.clone();
        fine_tune_property(
            &mut head,
            &mut backbone,
            target_sentences,
            &train_inst,
            cfg,
            !plan.freeze_backbone,
        )?;
        fold_cms.push(property_confusion(
            &head,
            &backbone,
            target_sentences,
            &test_inst,
            plan.target_property,
        )?);
    }
    let report = build_report(plan.target_property.name(), &fold_cms)?;

    // Final model: fine-tune the phase-1 checkpoint on all target data.
    let mut backbone = phase1_backbone.clone_state();
    let mut head = phase1_head;
    fine_tune_property(
        &mut head,
        &mut backbone,
        target_sentences,
        &target_instances,
        cfg,
        !plan.freeze_backbone,
    )?;
    Ok(TransferOutcome { report, backbone, head })
}

/// Incremental property training session (epoch-at-a-time), so callers can
/// checkpoint between epochs.
pub struct PropertySession<'a> {
    pub head: PropertyHead,
    head_opt: crate::tasks::property::PropertyOpt,
    backbone_opt: crate::tasks::backbone::BackboneOpt,
    sentences: &'a [&'a Sentence],
    trees: Vec<crate::graph::DepTree>,
    instances: &'a [PropertyInstance],
    groups: Vec<(usize, Vec<usize>)>,
    order: Vec<usize>,
    rng: rand_chacha::ChaCha8Rng,
    lr: f64,
}

impl<'a> PropertySession<'a> {
    pub fn new(
        property: PropertyKind,
        strategy: SpanStrategy,
        sentences: &'a [&'a Sentence],
        instances: &'a [PropertyInstance],
        backbone: &Backbone,
        cfg: &TrainConfig,
    ) -> Result<Self, TrainError> {
        if instances.is_empty() {
            return Err(TrainError::EmptyTrainingSet);
        }
        let first = instances[0].label_idx;
        if instances.iter().all(|i| i.label_idx == first) {
            return Err(TrainError::SingleClassTrainingSet);
        }
        let trees = sentences
            .iter()
            .map(|s| s.dep_tree().map_err(TrainError::Graph))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rng = cfg.rng(0x9409 + property as u64);
        let head =
            PropertyHead::new(property, strategy, backbone.hidden_dim(), cfg.mlp_dim, &mut rng);
        let head_opt = head.new_opt();
        let backbone_opt = backbone.new_opt();
        let mut by_sentence: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (idx, inst) in instances.iter().enumerate() {
            by_sentence.entry(inst.sentence).or_default().push(idx);
        }
        let groups: Vec<(usize, Vec<usize>)> = by_sentence.into_iter().collect();
        let order: Vec<usize> = (0..groups.len()).collect();
        Ok(PropertySession {
            head,
            head_opt,
            backbone_opt,
            sentences,
            trees,
            instances,
            groups,
            order,
            rng,
            lr: cfg.lr,
        })
    }

    /// One pass over the data; returns the mean loss.
    pub fn run_epoch(
        &mut self,
        backbone: &mut Backbone,
        update_backbone: bool,
    ) -> Result<f64, TrainError> {
        use rand::seq::SliceRandom;
        self.order.shuffle(&mut self.rng);
        let mut epoch_loss = 0.0;
        for &gi in &self.order {
            let (si, inst_indices) = &self.groups[gi];
            let sent = self.sentences[*si];
            let (hidden, cache) = backbone.forward(sent)?;
            let mut d_hidden = Array2::<f64>::zeros(hidden.dim());
            let mut grads = self.head.zero_grads();
            let scale = 1.0 / inst_indices.len() as f64;
            let mut loss_sum = 0.0;
            for &ii in inst_indices {
                let inst = &self.instances[ii];
                let (logits, prop_cache) = self.head.forward(&hidden, &self.trees[*si], &inst.trigger);
                let logits_2d = logits.insert_axis(ndarray::Axis(0));
                let (loss, d_logits) =
                    crate::nn::cross_entropy(&logits_2d, &[inst.label_idx], None);
                loss_sum += loss;
                let mut d_logits = d_logits.row(0).to_owned();
                d_logits.mapv_inplace(|v| v * scale);
                self.head.backward(&hidden, &prop_cache, &d_logits, &mut grads, &mut d_hidden);
            }
            self.head.apply_grads(&grads, &mut self.head_opt, self.lr);
            if update_backbone {
                let bb = backbone.backward(sent, &cache, &d_hidden);
                backbone.apply_grads(&bb, &mut self.backbone_opt, self.lr);
            }
            if !loss_sum.is_finite() {
                return Err(TrainError::DivergedLoss(0));
            }
            epoch_loss += loss_sum * scale;
        }
        Ok(epoch_loss / self.groups.len().max(1) as f64)
    }
}

/// Fine-tunes an existing head (and optionally the backbone) on instances.
fn fine_tune_property(
    head: &mut PropertyHead,
    backbone: &mut Backbone,
    sentences: &[&Sentence],
    instances: &[PropertyInstance],
    cfg: &TrainConfig,
    update_backbone: bool,
) -> Result<(), TransferError> {
    if instances.is_empty() {
        return Err(TrainError::EmptyTrainingSet.into());
    }
    let trees = sentences
        .iter()
        .map(|s| s.dep_tree().map_err(TrainError::Graph))
        .collect::<Result<Vec<_>, _>>()?;
    let mut head_opt = head.new_opt();
    let mut backbone_opt = backbone.new_opt();
    let mut by_sentence: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, inst) in instances.iter().enumerate() {
        by_sentence.entry(inst.sentence).or_default().push(idx);
    }
    let groups: Vec<(usize, Vec<usize>)> = by_sentence.into_iter().collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    let mut rng = cfg.rng(0xF17E);
    for _ in 0..cfg.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        for &gi in &order {
            let (si, inst_indices) = &groups[gi];
            let sent = sentences[*si];
            let (hidden, cache) = backbone.forward(sent).map_err(TrainError::Encoder)?;
            let mut d_hidden = Array2::<f64>::zeros(hidden.dim());
            let mut grads = head.zero_grads();
            let scale = 1.0 / inst_indices.len() as f64;
            for &ii in inst_indices {
                let inst = &instances[ii];
                let (logits, prop_cache) = head.forward(&hidden, &trees[*si], &inst.trigger);
                let logits_2d = logits.insert_axis(ndarray::Axis(0));
                let (_, d_logits) = crate::nn::cross_entropy(&logits_2d, &[inst.label_idx], None);
                let mut d_logits = d_logits.row(0).to_owned();
                d_logits.mapv_inplace(|v| v * scale);
                head.backward(&hidden, &prop_cache, &d_logits, &mut grads, &mut d_hidden);
            }
            head.apply_grads(&grads, &mut head_opt, cfg.lr);
            if update_backbone {
                let bb = backbone.backward(sent, &cache, &d_hidden);
                backbone.apply_grads(&bb, &mut backbone_opt, cfg.lr);
            }
        }
    }
    Ok(())
}

/// Macro-F1 of a property head over instances.
fn eval_property(
    head: &PropertyHead,
    backbone: &Backbone,
    sentences: &[&Sentence],
    instances: &[PropertyInstance],
    n_classes: usize,
) -> Result<f64, TransferError> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let classes = (0..n_classes).map(|i| i.to_string()).collect();
    let mut cm = ConfusionMatrix::new(classes);
    for inst in instances {
        let pred = head
            .predict_label(backbone, sentences[inst.sentence], &inst.trigger)
            .map_err(TransferError::Data)?;
        cm.add(inst.label_idx, pred);
    }
    Ok(crate::eval::macro_f1(&cm))
}

/// Confusion matrix of a property head over instances, with class names.
pub fn property_confusion(
    head: &PropertyHead,
    backbone: &Backbone,
    sentences: &[&Sentence],
    instances: &[PropertyInstance],
    kind: PropertyKind,
) -> Result<ConfusionMatrix, TransferError> {
    let mut cm = ConfusionMatrix::new(kind.classes());
    for inst in instances {
        let pred = head
            .predict_label(backbone, sentences[inst.sentence], &inst.trigger)
            .map_err(TransferError::Data)?;
        cm.add(inst.label_idx, pred);
    }
    Ok(cm)
}
