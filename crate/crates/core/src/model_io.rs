//! Saved-model layout: a manifest plus serialized pipeline and property
//! models. Encoders are referenced by id and reconstructed at load time, so
//! a model directory is self-contained as long as the encoder is available.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::encoder::{ContextualEncoder, HashEncoder};
use crate::features::{ChannelConfig, ChannelTables};
use crate::nn::Linear;
use crate::tasks::trainer::{Task, TrainCurve};
use crate::tasks::{ArpHead, Backbone, PropertyHead, PropertyKind, TokenClassifierHead};
use crate::transfer::{EeLabels, Pipeline, TrainedStage};

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("encoder {0:?} is not available in this build")]
    EncoderUnavailable(String),
    #[error("model directory is missing {0}")]
    MissingFile(&'static str),
}

/// Builds an encoder from its manifest id. Hash encoders parse from
/// `hash-<dim>@v1:<seed>`; anything else is unavailable offline.
pub fn encoder_from_id(id: &str) -> Option<Arc<dyn ContextualEncoder>> {
    let rest = id.strip_prefix("hash-")?;
    let (dim, rest) = rest.split_once("@v1:")?;
    let dim: usize = dim.parse().ok()?;
    let seed: u64 = rest.parse().ok()?;
    Some(Arc::new(HashEncoder::new(dim, seed)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackboneState {
    pub encoder_id: String,
    pub cfg: ChannelConfig,
    pub tables: ChannelTables,
    pub trunk: Linear,
}

impl BackboneState {
    pub fn of(backbone: &Backbone) -> Self {
        BackboneState {
            encoder_id: backbone.encoder.id(),
            cfg: backbone.cfg.clone(),
            tables: backbone.tables.clone(),
            trunk: backbone.trunk.clone(),
        }
    }

    pub fn restore(self) -> Result<Backbone, ModelIoError> {
        let encoder = encoder_from_id(&self.encoder_id)
            .ok_or(ModelIoError::EncoderUnavailable(self.encoder_id))?;
        Ok(Backbone { encoder, cfg: self.cfg, tables: self.tables, trunk: self.trunk })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedStageState {
    pub tasks: Vec<Task>,
    pub backbone: BackboneState,
    pub emd: Option<TokenClassifierHead>,
    pub ed: Option<TokenClassifierHead>,
    pub arp: Option<ArpHead>,
    pub curve: TrainCurve,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineState {
    pub stages: Vec<TrainedStageState>,
    pub labels: EeLabels,
}

impl PipelineState {
    pub fn of(pipeline: &Pipeline) -> Self {
        PipelineState {
            stages: pipeline
                .stages
                .iter()
                .map(|s| TrainedStageState {
                    tasks: s.tasks.clone(),
                    backbone: BackboneState::of(&s.backbone),
                    emd: s.heads.emd.clone(),
                    ed: s.heads.ed.clone(),
                    arp: s.heads.arp.clone(),
                    curve: s.curve.clone(),
                })
                .collect(),
            labels: pipeline.labels.clone(),
        }
    }

    pub fn restore(self) -> Result<Pipeline, ModelIoError> {
        let mut stages = Vec::with_capacity(self.stages.len());
        for s in self.stages {
            stages.push(TrainedStage {
                tasks: s.tasks,
                backbone: s.backbone.restore()?,
                heads: crate::tasks::trainer::StageHeads { emd: s.emd, ed: s.ed, arp: s.arp },
                curve: s.curve,
            });
        }
        Ok(Pipeline { stages, labels: self.labels })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyModelState {
    pub kind: PropertyKind,
    pub backbone: BackboneState,
    pub head: PropertyHead,
}

/// Manifest recorded with every saved model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    pub setup: String,
    pub vocab_digest: String,
    pub encoder_id: String,
    pub channel_config: ChannelConfig,
    pub k: usize,
    pub strategy: String,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PIPELINE_FILE: &str = "pipeline.json";
pub const PROPERTIES_FILE: &str = "properties.json";

pub fn save_model(
    dir: &Path,
    manifest: &ModelManifest,
    pipeline: Option<&Pipeline>,
    properties: &[(PropertyKind, &Backbone, &PropertyHead)],
) -> Result<(), ModelIoError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(manifest)?)?;
    if let Some(pipeline) = pipeline {
        std::fs::write(
            dir.join(PIPELINE_FILE),
            serde_json::to_string(&PipelineState::of(pipeline))?,
        )?;
    }
    let states: Vec<PropertyModelState> = properties
        .iter()
        .map(|(kind, backbone, head)| PropertyModelState {
            kind: *kind,
            backbone: BackboneState::of(backbone),
            head: (*head).clone(),
        })
        .collect();
    std::fs::write(dir.join(PROPERTIES_FILE), serde_json::to_string(&states)?)?;
    Ok(())
}

pub struct LoadedModel {
    pub manifest: ModelManifest,
    pub pipeline: Option<Pipeline>,
    pub properties: BTreeMap<String, (Backbone, PropertyHead)>,
}

pub fn load_manifest(dir: &Path) -> Result<ModelManifest, ModelIoError> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(ModelIoError::MissingFile(MANIFEST_FILE));
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn load_model(dir: &Path) -> Result<LoadedModel, ModelIoError> {
    let manifest = load_manifest(dir)?;
    // The manifest encoder must be reconstructible before any weights load.
    encoder_from_id(&manifest.encoder_id)
        .ok_or_else(|| ModelIoError::EncoderUnavailable(manifest.encoder_id.clone()))?;
    let pipeline_path = dir.join(PIPELINE_FILE);
    let pipeline = if pipeline_path.exists() {
        let state: PipelineState = serde_json::from_str(&std::fs::read_to_string(pipeline_path)?)?;
        Some(state.restore()?)
    } else {
        None
    };
    let mut properties = BTreeMap::new();
    let props_path = dir.join(PROPERTIES_FILE);
    if props_path.exists() {
        let states: Vec<PropertyModelState> =
            serde_json::from_str(&std::fs::read_to_string(props_path)?)?;
        for state in states {
            properties.insert(
                state.kind.name().to_string(),
                (state.backbone.restore()?, state.head),
            );
        }
    }
    Ok(LoadedModel { manifest, pipeline, properties })
}
