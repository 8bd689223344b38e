//! Event-property classifiers (polarity, modality, intensity): a span
//! strategy produces one vector per event, a two-layer feed-forward network
//! with softmax produces the class distribution.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Trigger};
use crate::graph::DepTree;
use crate::model::TypedSpan;
use crate::nn::{argmax, softmax_vec, tanh, tanh_backward, AdamState, Linear};

use super::backbone::Backbone;
use super::spans::{span_representation, span_representation_backward, SpanRepCache, SpanStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PropertyKind {
    Polarity,
    Modality,
    Intensity,
}

impl PropertyKind {
    pub const ALL: [PropertyKind; 3] =
        [PropertyKind::Polarity, PropertyKind::Modality, PropertyKind::Intensity];

    pub fn name(&self) -> &'static str {
        match self {
            PropertyKind::Polarity => "polarity",
            PropertyKind::Modality => "modality",
            PropertyKind::Intensity => "intensity",
        }
    }

    /// Class labels in index order; the default value sits at index 0.
    pub fn classes(&self) -> Vec<String> {
        match self {
            PropertyKind::Polarity => vec!["POSITIVE".into(), "NEGATIVE".into()],
            PropertyKind::Modality => vec!["ASSERTED".into(), "OTHER".into()],
            PropertyKind::Intensity => {
                vec!["NEUTRAL".into(), "EASED".into(), "INTENSIFIED".into()]
            }
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            PropertyKind::Intensity => 3,
            _ => 2,
        }
    }

    /// Gold class index of a trigger for this property.
    pub fn label_index(&self, trigger: &Trigger) -> usize {
        match self {
            PropertyKind::Polarity => trigger.polarity as usize,
            PropertyKind::Modality => trigger.modality as usize,
            PropertyKind::Intensity => trigger.intensity as usize,
        }
    }
}

/// One training/evaluation instance: an event trigger in its sentence.
#[derive(Debug, Clone)]
pub struct PropertyInstance {
    /// Index into the sentence list the head is trained over.
    pub sentence: usize,
    pub trigger: TypedSpan,
    pub label_idx: usize,
}

/// Collects (sentence index, trigger, label) instances for a property.
pub fn property_instances(sentences: &[&Sentence], kind: PropertyKind) -> Vec<PropertyInstance> {
    let mut out = Vec::new();
    for (si, sent) in sentences.iter().enumerate() {
        for trig in &sent.triggers {
            out.push(PropertyInstance {
                sentence: si,
                trigger: trig.span(),
                label_idx: kind.label_index(trig),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyHead {
    pub property: PropertyKind,
    pub strategy: SpanStrategy,
    /// Attention scoring vector; present for the attentive strategy.
    pub attn_w: Option<Array1<f64>>,
    pub hidden: Linear,
    pub out: Linear,
}

pub struct PropertyCache {
    rep: Array1<f64>,
    span_cache: SpanRepCache,
    act: Array2<f64>,
}

pub struct PropertyGrads {
    pub attn_w: Option<Array1<f64>>,
    pub hidden_w: Array2<f64>,
    pub hidden_b: Array1<f64>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

pub struct PropertyOpt {
    attn_w: Option<AdamState>,
    hidden_w: AdamState,
    hidden_b: AdamState,
    out_w: AdamState,
    out_b: AdamState,
}

impl PropertyHead {
    pub fn new(
        property: PropertyKind,
        strategy: SpanStrategy,
        backbone_dim: usize,
        mlp_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let rep_dim = strategy.rep_dim(backbone_dim);
        let attn_w = strategy
            .needs_attention()
            .then(|| Array1::from_shape_fn(backbone_dim, |_| rng.random_range(-0.1..0.1)));
        PropertyHead {
            property,
            strategy,
            attn_w,
            hidden: Linear::new(rep_dim, mlp_dim, rng),
            out: Linear::new(mlp_dim, property.n_classes(), rng),
        }
    }

    /// Logits for one event.
    pub fn forward(
        &self,
        hidden_states: &Array2<f64>,
        tree: &DepTree,
        trigger: &TypedSpan,
    ) -> (Array1<f64>, PropertyCache) {
        let (rep, span_cache) =
            span_representation(self.strategy, hidden_states, tree, trigger, self.attn_w.as_ref());
        let rep_2d = rep.clone().insert_axis(Axis(0));
        // tanh keeps the hidden layer trainable from any initialization.
        let act = tanh(&self.hidden.forward(&rep_2d));
        let logits = self.out.forward(&act).row(0).to_owned();
        (logits, PropertyCache { rep, span_cache, act })
    }

    /// Backward for one event; `d_hidden_states` accumulates sentence-level
    /// gradients across events.
    pub fn backward(
        &self,
        hidden_states: &Array2<f64>,
        cache: &PropertyCache,
        d_logits: &Array1<f64>,
        grads: &mut PropertyGrads,
        d_hidden_states: &mut Array2<f64>,
    ) {
        let d_logits_2d = d_logits.clone().insert_axis(Axis(0));
        let (d_act, d_out_w, d_out_b) = self.out.backward(&cache.act, &d_logits_2d);
        grads.out_w += &d_out_w;
        grads.out_b += &d_out_b;
        let d_pre = tanh_backward(&cache.act, &d_act);
        let rep_2d = cache.rep.clone().insert_axis(Axis(0));
        let (d_rep, d_hidden_w, d_hidden_b) = self.hidden.backward(&rep_2d, &d_pre);
        grads.hidden_w += &d_hidden_w;
        grads.hidden_b += &d_hidden_b;
        let d_rep = d_rep.row(0).to_owned();
        let d_attn = span_representation_backward(
            hidden_states,
            self.attn_w.as_ref(),
            &cache.span_cache,
            &d_rep,
            d_hidden_states,
        );
        if let (Some(da), Some(acc)) = (d_attn, grads.attn_w.as_mut()) {
            *acc += &da;
        }
    }

    pub fn zero_grads(&self) -> PropertyGrads {
        PropertyGrads {
            attn_w: self.attn_w.as_ref().map(|w| Array1::zeros(w.len())),
            hidden_w: Array2::zeros(self.hidden.w.dim()),
            hidden_b: Array1::zeros(self.hidden.b.len()),
            out_w: Array2::zeros(self.out.w.dim()),
            out_b: Array1::zeros(self.out.b.len()),
        }
    }

    pub fn new_opt(&self) -> PropertyOpt {
        PropertyOpt {
            attn_w: self.attn_w.as_ref().map(|w| AdamState::new(w.len())),
            hidden_w: AdamState::new(self.hidden.w.len()),
            hidden_b: AdamState::new(self.hidden.b.len()),
            out_w: AdamState::new(self.out.w.len()),
            out_b: AdamState::new(self.out.b.len()),
        }
    }

    pub fn apply_grads(&mut self, grads: &PropertyGrads, opt: &mut PropertyOpt, lr: f64) {
        if let (Some(w), Some(g), Some(state)) =
            (self.attn_w.as_mut(), grads.attn_w.as_ref(), opt.attn_w.as_mut())
        {
            state.step(w.iter_mut(), g.iter(), lr);
        }
        opt.hidden_w.step(self.hidden.w.iter_mut(), grads.hidden_w.iter(), lr);
        opt.hidden_b.step(self.hidden.b.iter_mut(), grads.hidden_b.iter(), lr);
        opt.out_w.step(self.out.w.iter_mut(), grads.out_w.iter(), lr);
        opt.out_b.step(self.out.b.iter_mut(), grads.out_b.iter(), lr);
    }

    /// Class probabilities for one event; sums to 1.
    pub fn predict_probs(
        &self,
        backbone: &Backbone,
        sent: &Sentence,
        trigger: &TypedSpan,
    ) -> Result<Array1<f64>, String> {
        let (hidden, _) = backbone.forward(sent).map_err(|e| e.to_string())?;
        let tree = sent.dep_tree().map_err(|e| e.to_string())?;
        let (logits, _) = self.forward(&hidden, &tree, trigger);
        Ok(softmax_vec(&logits))
    }

    pub fn predict_label(
        &self,
        backbone: &Backbone,
        sent: &Sentence,
        trigger: &TypedSpan,
    ) -> Result<usize, String> {
        let probs = self.predict_probs(backbone, sent, trigger)?;
        Ok(argmax(probs.as_slice().expect("contiguous")))
    }
}
