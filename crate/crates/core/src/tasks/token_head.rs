//! BIO token classification heads for entity mention detection (EMD) and
//! event detection (ED).

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::model::{decode_bio, encode_bio, BioTag, BioTagVocab, TypedSpan};
use crate::nn::{argmax, softmax_rows, Linear};

use super::backbone::Backbone;

/// Which detection task a token head serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenTask {
    Emd,
    Ed,
}

impl TokenTask {
    pub fn name(&self) -> &'static str {
        match self {
            TokenTask::Emd => "EMD",
            TokenTask::Ed => "ED",
        }
    }

    /// Gold spans of this task in a sentence.
    pub fn gold_spans(&self, sent: &Sentence) -> Vec<TypedSpan> {
        match self {
            TokenTask::Emd => sent.entity_spans(),
            TokenTask::Ed => sent.trigger_spans(),
        }
    }
}

/// Linear projection from backbone hidden states to BIO tag logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenClassifierHead {
    pub task: TokenTask,
    pub tags: BioTagVocab,
    pub proj: Linear,
}

impl TokenClassifierHead {
    pub fn new(task: TokenTask, labels: Vec<String>, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let tags = BioTagVocab::new(labels);
        let proj = Linear::new(hidden_dim, tags.size(), rng);
        TokenClassifierHead { task, tags, proj }
    }

    pub fn logits(&self, hidden: &Array2<f64>) -> Array2<f64> {
        self.proj.forward(hidden)
    }

    /// Per-token distributions over the tag space; rows sum to 1.
    pub fn probabilities(&self, hidden: &Array2<f64>) -> Array2<f64> {
        softmax_rows(&self.logits(hidden))
    }

    /// Gold tag indices for a sentence, or an error message when the gold
    /// spans are not BIO-encodable.
    pub fn gold_tag_indices(&self, sent: &Sentence) -> Result<Vec<usize>, String> {
        let spans = self.task.gold_spans(sent);
        let tags = encode_bio(&spans, sent.len()).map_err(|e| e.to_string())?;
        tags.iter()
            .map(|t| {
                self.tags
                    .index(t)
                    .ok_or_else(|| format!("tag {t} outside head vocabulary"))
            })
            .collect()
    }

    pub fn predict_tag_indices(&self, hidden: &Array2<f64>) -> Vec<usize> {
        let logits = self.logits(hidden);
        (0..logits.nrows())
            .map(|i| argmax(logits.row(i).as_slice().expect("contiguous row")))
            .collect()
    }

    /// Argmax tags decoded to spans; the decoder repairs ill-formed output,
    /// so this never fails and the spans never overlap.
    pub fn predict_spans(&self, backbone: &Backbone, sent: &Sentence) -> Vec<TypedSpan> {
        let (hidden, _) = match backbone.forward(sent) {
            Ok(x) => x,
            Err(e) => {
                log::error!("encoder failed during prediction: {e}");
                return Vec::new();
            }
        };
        self.predict_spans_from_hidden(&hidden)
    }

    pub fn predict_spans_from_hidden(&self, hidden: &Array2<f64>) -> Vec<TypedSpan> {
        let indices = self.predict_tag_indices(hidden);
        let tags: Vec<BioTag> =
            indices.iter().map(|&i| self.tags.tag(i).expect("index within head")).collect();
        decode_bio(&tags)
    }
}
