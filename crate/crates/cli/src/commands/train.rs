use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use serde::Deserialize;

use petrel_core::corpus::{Corpus, Sentence};
use petrel_core::eval::{f1_avg, kfold, stratified_kfold, MetricsReport};
use petrel_core::features::ChannelConfig;
use petrel_core::model::LabelVocab;
use petrel_core::model_io::{encoder_from_id, save_model, ModelManifest};
use petrel_core::tasks::property::property_instances;
use petrel_core::tasks::trainer::TrainConfig;
use petrel_core::tasks::{PropertyKind, SpanStrategy};
use petrel_core::transfer::{
    fresh_backbone, run_setup, EeLabels, RunConfig, SetupKind, TaskSetup, TransferError,
};

use super::{fail, CliResult, ExitCode, ExitCtx};

/// Experiment description parsed from TOML.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: String,
    pub output_dir: String,
    #[serde(default = "defaults::encoder")]
    pub encoder: String,
    #[serde(default = "defaults::setup")]
    pub setup: String,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default)]
    pub literal_eq4: bool,
    #[serde(default = "defaults::k")]
    pub k: usize,
    #[serde(default = "defaults::strategy")]
    pub strategy: String,
    #[serde(default = "defaults::window_radius")]
    pub window_radius: usize,
    #[serde(default = "defaults::seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "defaults::folds")]
    pub folds: usize,
    #[serde(default = "defaults::jobs")]
    pub jobs: usize,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    #[serde(default = "defaults::hidden_dim")]
    pub hidden_dim: usize,
    #[serde(default = "defaults::gcn_dim")]
    pub gcn_dim: usize,
    #[serde(default = "defaults::gcn_layers")]
    pub gcn_layers: usize,
    #[serde(default = "defaults::mlp_dim")]
    pub mlp_dim: usize,
    #[serde(default = "defaults::train_properties")]
    pub train_properties: bool,
}

mod defaults {
    pub fn encoder() -> String {
        "hash-32@v1:1".to_string()
    }
    pub fn setup() -> String {
        "combo2".to_string()
    }
    pub fn beta() -> f64 {
        2.0
    }
    pub fn k() -> usize {
        1
    }
    pub fn strategy() -> String {
        "self-attentive".to_string()
    }
    pub fn window_radius() -> usize {
        1
    }
    pub fn seeds() -> Vec<u64> {
        vec![17]
    }
    pub fn folds() -> usize {
        5
    }
    pub fn jobs() -> usize {
        1
    }
    pub fn epochs() -> usize {
        30
    }
    pub fn lr() -> f64 {
        0.02
    }
    pub fn hidden_dim() -> usize {
        48
    }
    pub fn gcn_dim() -> usize {
        32
    }
    pub fn gcn_layers() -> usize {
        2
    }
    pub fn mlp_dim() -> usize {
        32
    }
    pub fn train_properties() -> bool {
        true
    }
}

impl ExperimentConfig {
    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            seed,
            hidden_dim: self.hidden_dim,
            gcn_dim: self.gcn_dim,
            gcn_layers: self.gcn_layers,
            k: self.k,
            mlp_dim: self.mlp_dim,
            downweight_none: true,
        }
    }
}

fn exit_code_of(e: &TransferError) -> ExitCode {
    match e {
        TransferError::StageFailure { .. } | TransferError::Train(_) => ExitCode::Training,
        _ => ExitCode::Data,
    }
}

pub fn run(config_path: &Path) -> CliResult {
    let raw = std::fs::read_to_string(config_path)
        .with_context(|| format!("cannot read {}", config_path.display()))
        .or_exit(ExitCode::Usage)?;
    let cfg: ExperimentConfig = toml::from_str(&raw).or_exit(ExitCode::Usage)?;

    let setup_kind = match SetupKind::parse(&cfg.setup) {
        Some(k) => k,
        None => {
            return fail(
                ExitCode::Usage,
                anyhow!(
                    "unknown setup {:?}; expected one of single, full-mtl, full-stl, combo1, combo2",
                    cfg.setup
                ),
            )
        }
    };
    let strategy = match SpanStrategy::parse(&cfg.strategy, cfg.window_radius) {
        Some(s) => s,
        None => {
            return fail(
                ExitCode::Usage,
                anyhow!("unknown strategy {:?}; expected window, subtree, or self-attentive", cfg.strategy),
            )
        }
    };
    let encoder = match encoder_from_id(&cfg.encoder) {
        Some(e) => e,
        None => return fail(ExitCode::Model, anyhow!("encoder {:?} unavailable", cfg.encoder)),
    };
    if cfg.seeds.is_empty() {
        return fail(ExitCode::Usage, anyhow!("seeds must be non-empty"));
    }

    let corpus = Corpus::load(Path::new(&cfg.corpus)).or_exit(ExitCode::Data)?;
    let sentences: Vec<&Sentence> = corpus.sentences().collect();
    if sentences.is_empty() {
        return fail(ExitCode::Data, anyhow!("corpus has no sentences"));
    }
    let vocab = LabelVocab::crude_oil_news();
    let labels = EeLabels::from_vocab(&vocab);
    let channel_cfg = ChannelConfig::default();
    let setup = TaskSetup::new(setup_kind, cfg.beta, cfg.literal_eq4)
        .map_err(|e| anyhow!(e.to_string()))
        .or_exit(ExitCode::Usage)?;

    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let run_dir = Path::new(&cfg.output_dir).join(format!("{stamp}-{}", setup_kind.name()));
    std::fs::create_dir_all(&run_dir).or_exit(ExitCode::Data)?;

    let mut all_reports: BTreeMap<String, Vec<MetricsReport>> = BTreeMap::new();
    let mut final_model = None;

    for (seed_no, &seed) in cfg.seeds.iter().enumerate() {
        let train_cfg = cfg.train_config(seed);
        let folds = kfold(sentences.len(), cfg.folds.max(2), seed).or_exit(ExitCode::Data)?;
        let run_cfg = RunConfig {
            train: train_cfg.clone(),
            beta: cfg.beta,
            literal_eq4: cfg.literal_eq4,
            jobs: cfg.jobs,
            train_final: seed_no == 0,
        };
        let outcome = run_setup(
            &setup,
            &sentences,
            &folds,
            &labels,
            Arc::clone(&encoder),
            &channel_cfg,
            &run_cfg,
        )
        .map_err(|e| {
            let code = exit_code_of(&e);
            super::CliError { code, error: anyhow!(e.to_string()) }
        })?;

        let seed_dir = run_dir.join(format!("seed-{seed}"));
        std::fs::create_dir_all(&seed_dir).or_exit(ExitCode::Data)?;
        for (task, report) in &outcome.reports {
            write_report(&seed_dir, task.name(), report)?;
            all_reports.entry(task.name().to_string()).or_default().push(report.clone());
        }

        if cfg.train_properties {
            for kind in PropertyKind::ALL {
                match train_property_cv(&sentences, kind, strategy, &train_cfg, &cfg, &encoder) {
                    Ok((report, model)) => {
                        write_report(&seed_dir, kind.name(), &report)?;
                        all_reports.entry(kind.name().to_string()).or_default().push(report);
                        if seed_no == 0 {
                            property_models_push(&mut final_model, kind, model);
                        }
                    }
                    Err(e) => {
                        return fail(ExitCode::Training, anyhow!("{} training: {e}", kind.name()))
                    }
                }
            }
        }
        if seed_no == 0 {
            if let Some(pipeline) = outcome.final_pipeline {
                set_pipeline(&mut final_model, pipeline);
            }
        }
        println!("seed {seed}: reports written to {}", seed_dir.display());
    }

    // Aggregate across seeds: Eq. 1 averaging over every (seed, fold) F1.
    let mut aggregate = BTreeMap::new();
    for (task, reports) in &all_reports {
        let fold_f1s: Vec<f64> =
            reports.iter().flat_map(|r| r.per_fold.iter().map(|f| f.f1)).collect();
        let mccs: Vec<f64> = reports.iter().map(|r| r.mcc).collect();
        aggregate.insert(
            task.clone(),
            serde_json::json!({
                "f1_avg": f1_avg(&fold_f1s).unwrap_or(0.0),
                "mcc_mean": mccs.iter().sum::<f64>() / mccs.len() as f64,
                "n_runs": reports.len(),
            }),
        );
    }
    std::fs::write(
        run_dir.join("aggregate.json"),
        serde_json::to_string_pretty(&aggregate).or_exit(ExitCode::Data)?,
    )
    .or_exit(ExitCode::Data)?;

    // Persist the final model (first seed).
    if let Some((pipeline, properties)) = final_model_parts(final_model) {
        let manifest = ModelManifest {
            setup: setup_kind.name().to_string(),
            vocab_digest: vocab.digest(),
            encoder_id: cfg.encoder.clone(),
            channel_config: channel_cfg.clone(),
            k: cfg.k,
            strategy: strategy.name(),
            seed: cfg.seeds[0],
            metrics: all_reports
                .iter()
                .map(|(task, reports)| (format!("{task}_f1"), reports[0].macro_f1))
                .collect(),
        };
        let prop_refs: Vec<_> =
            properties.iter().map(|(k, (b, h))| (*k, b, h)).collect();
        save_model(&run_dir.join("model"), &manifest, pipeline.as_ref(), &prop_refs)
            .or_exit(ExitCode::Data)?;
        println!("model saved to {}", run_dir.join("model").display());
    }
    println!("aggregate written to {}", run_dir.join("aggregate.json").display());
    Ok(())
}

type PropertyModel = (petrel_core::tasks::Backbone, petrel_core::tasks::PropertyHead);
type FinalModel =
    (Option<petrel_core::transfer::Pipeline>, BTreeMap<PropertyKind, PropertyModel>);

fn property_models_push(slot: &mut Option<FinalModel>, kind: PropertyKind, model: PropertyModel) {
    slot.get_or_insert_with(|| (None, BTreeMap::new())).1.insert(kind, model);
}

fn set_pipeline(slot: &mut Option<FinalModel>, pipeline: petrel_core::transfer::Pipeline) {
    slot.get_or_insert_with(|| (None, BTreeMap::new())).0 = Some(pipeline);
}

#[allow(clippy::type_complexity)]
fn final_model_parts(
    slot: Option<FinalModel>,
) -> Option<(Option<petrel_core::transfer::Pipeline>, BTreeMap<PropertyKind, PropertyModel>)> {
    slot
}

fn write_report(dir: &Path, name: &str, report: &MetricsReport) -> CliResult {
    std::fs::write(
        dir.join(format!("report-{name}.json")),
        serde_json::to_string_pretty(report).or_exit(ExitCode::Data)?,
    )
    .or_exit(ExitCode::Data)?;
    std::fs::write(dir.join(format!("report-{name}.txt")), report.text_table())
        .or_exit(ExitCode::Data)?;
    print!("{}", report.text_table());
    Ok(())
}

/// Stratified cross-validation for one property head, mirroring the
/// property-classification protocol: per-fold fresh backbone + head, folds
/// stratified by the property label over events.
pub fn train_property_cv(
    sentences: &[&Sentence],
    kind: PropertyKind,
    strategy: SpanStrategy,
    train_cfg: &TrainConfig,
    cfg: &ExperimentConfig,
    encoder: &Arc<dyn petrel_core::features::encoder::ContextualEncoder>,
) -> Result<(MetricsReport, PropertyModel), anyhow::Error> {
    let instances = property_instances(sentences, kind);
    if instances.is_empty() {
        return Err(anyhow!("no events for {}", kind.name()));
    }
    let labels: Vec<String> =
        instances.iter().map(|i| kind.classes()[i.label_idx].clone()).collect();
    let folds = stratified_kfold(&labels, cfg.folds.max(2), train_cfg.seed)?;
    let channel_cfg = ChannelConfig::default();
    let mut fold_cms = Vec::new();
    for fold in 0..folds.k() {
        let (train_idx, test_idx) = folds.split(fold);
        let train_inst: Vec<_> = train_idx.iter().map(|&i| instances[i].clone()).collect();
        let test_inst: Vec<_> = test_idx.iter().map(|&i| instances[i].clone()).collect();
        let mut fold_cfg = train_cfg.clone();
        fold_cfg.seed = train_cfg.seed ^ (fold as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15);
        let mut backbone = fresh_backbone(sentences, Arc::clone(encoder), &channel_cfg, &fold_cfg);
        let (head, _) = petrel_core::tasks::trainer::train_property_head(
            kind,
            strategy,
            sentences,
            &train_inst,
            &mut backbone,
            &fold_cfg,
        )?;
        fold_cms.push(petrel_core::transfer::property_confusion(
            &head, &backbone, sentences, &test_inst, kind,
        )?);
    }
    let report = petrel_core::eval::build_report(kind.name(), &fold_cms)?;

    // Final model on all instances.
    let mut backbone = fresh_backbone(sentences, Arc::clone(encoder), &channel_cfg, train_cfg);
    let (head, _) = petrel_core::tasks::trainer::train_property_head(
        kind, strategy, sentences, &instances, &mut backbone, train_cfg,
    )?;
    Ok((report, (backbone, head)))
}
