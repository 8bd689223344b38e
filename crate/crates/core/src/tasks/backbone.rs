//! The shared encoding stack: contextual word vectors, channel embeddings,
//! and a dense trunk layer. Task heads read the trunk output; multi-task and
//! sequential setups share or hand off these parameters.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::corpus::Sentence;
use crate::features::encoder::{ContextualEncoder, EncoderError};
use crate::features::{assemble_channels, encode_tokens, ChannelConfig, ChannelTables, TagVocab};
use crate::nn::{relu, relu_backward, AdamState, Linear};

pub struct Backbone {
    pub encoder: Arc<dyn ContextualEncoder>,
    pub cfg: ChannelConfig,
    pub tables: ChannelTables,
    pub trunk: Linear,
}

/// Activations needed to push gradients back into the trunk and tables.
pub struct BackboneCache {
    feats: Array2<f64>,
    pre: Array2<f64>,
}

/// Gradients for every trainable backbone parameter.
pub struct BackboneGrads {
    pub trunk_w: Array2<f64>,
    pub trunk_b: Array1<f64>,
    pub pos: Array2<f64>,
    pub ner: Array2<f64>,
    pub dep: Array2<f64>,
}

/// Adam state per backbone tensor.
pub struct BackboneOpt {
    trunk_w: AdamState,
    trunk_b: AdamState,
    pos: AdamState,
    ner: AdamState,
    dep: AdamState,
}

impl Backbone {
    pub fn new(
        encoder: Arc<dyn ContextualEncoder>,
        cfg: ChannelConfig,
        vocabs: (TagVocab, TagVocab, TagVocab),
        hidden_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let tables = ChannelTables::new(&cfg, vocabs.0, vocabs.1, vocabs.2, rng);
        let width = cfg.feature_width(encoder.dim());
        Backbone { encoder, cfg, tables, trunk: Linear::new(width, hidden_dim, rng) }
    }

    pub fn hidden_dim(&self) -> usize {
        self.trunk.out_dim()
    }

    /// Deep copy of the trainable state (encoder handle is shared).
    pub fn clone_state(&self) -> Backbone {
        Backbone {
            encoder: Arc::clone(&self.encoder),
            cfg: self.cfg.clone(),
            tables: self.tables.clone(),
            trunk: self.trunk.clone(),
        }
    }

    /// Hidden states for a sentence: `relu([word||pos||ner||dep] W + b)`.
    pub fn forward(&self, sent: &Sentence) -> Result<(Array2<f64>, BackboneCache), EncoderError> {
        let word = encode_tokens(self.encoder.as_ref(), sent)?;
        let feats = assemble_channels(&word, sent, &self.cfg, &self.tables).matrix;
        let pre = self.trunk.forward(&feats);
        let hidden = relu(&pre);
        Ok((hidden, BackboneCache { feats, pre }))
    }

    /// Backward from hidden-state gradients into parameter gradients.
    pub fn backward(&self, sent: &Sentence, cache: &BackboneCache, d_hidden: &Array2<f64>) -> BackboneGrads {
        let d_pre = relu_backward(&cache.pre, d_hidden);
        let (d_feats, trunk_w, trunk_b) = self.trunk.backward(&cache.feats, &d_pre);

        let mut pos = Array2::zeros(self.tables.pos.weights.dim());
        let mut ner = Array2::zeros(self.tables.ner.weights.dim());
        let mut dep = Array2::zeros(self.tables.dep.weights.dim());
        let word_dim = self.encoder.dim();
        for (i, token) in sent.tokens.iter().enumerate() {
            let mut col = word_dim; // word channel is frozen
            if self.cfg.use_pos {
                let row = self.tables.pos.vocab.index(&token.pos);
                let g = d_feats.row(i);
                let g = g.slice(ndarray::s![col..col + self.cfg.pos_dim]);
                pos.row_mut(row).zip_mut_with(&g, |a, &b| *a += b);
                col += self.cfg.pos_dim;
            }
            if self.cfg.use_ner {
                let row = self.tables.ner.vocab.index(&token.ner);
                let g = d_feats.row(i);
                let g = g.slice(ndarray::s![col..col + self.cfg.ner_dim]);
                ner.row_mut(row).zip_mut_with(&g, |a, &b| *a += b);
                col += self.cfg.ner_dim;
            }
            if self.cfg.use_dep {
                let row = self.tables.dep.vocab.index(&token.dep_label);
                let g = d_feats.row(i);
                let g = g.slice(ndarray::s![col..col + self.cfg.dep_dim]);
                dep.row_mut(row).zip_mut_with(&g, |a, &b| *a += b);
            }
        }
        BackboneGrads { trunk_w, trunk_b, pos, ner, dep }
    }

    pub fn new_opt(&self) -> BackboneOpt {
        BackboneOpt {
            trunk_w: AdamState::new(self.trunk.w.len()),
            trunk_b: AdamState::new(self.trunk.b.len()),
            pos: AdamState::new(self.tables.pos.weights.len()),
            ner: AdamState::new(self.tables.ner.weights.len()),
            dep: AdamState::new(self.tables.dep.weights.len()),
        }
    }

    pub fn apply_grads(&mut self, grads: &BackboneGrads, opt: &mut BackboneOpt, lr: f64) {
        opt.trunk_w.step(self.trunk.w.iter_mut(), grads.trunk_w.iter(), lr);
        opt.trunk_b.step(self.trunk.b.iter_mut(), grads.trunk_b.iter(), lr);
        opt.pos.step(self.tables.pos.weights.iter_mut(), grads.pos.iter(), lr);
        opt.ner.step(self.tables.ner.weights.iter_mut(), grads.ner.iter(), lr);
        opt.dep.step(self.tables.dep.weights.iter_mut(), grads.dep.iter(), lr);
    }

    /// Hash of all trainable parameters; used to assert bit-exact handoff
    /// between transfer stages.
    pub fn params_digest(&self) -> String {
        let mut hasher = Sha256::new();
        let mut feed = |arr: &Array2<f64>| {
            for v in arr.iter() {
                hasher.update(v.to_bits().to_le_bytes());
            }
        };
        feed(&self.trunk.w);
        feed(&self.tables.pos.weights);
        feed(&self.tables.ner.weights);
        feed(&self.tables.dep.weights);
        for v in self.trunk.b.iter() {
            hasher.update(v.to_bits().to_le_bytes());
        }
        let hash = hasher.finalize();
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Hidden states for a batch of sentences without gradient tracking.
pub fn forward_sentences(
    backbone: &Backbone,
    sentences: &[&Sentence],
) -> Result<Vec<Array2<f64>>, EncoderError> {
    sentences.iter().map(|s| backbone.forward(s).map(|(h, _)| h)).collect()
}

/// Sums a slice of hidden-gradient matrices shaped like `template`.
pub fn zeros_like(template: &Array2<f64>) -> Array2<f64> {
    Array2::zeros(template.dim())
}

/// Mean-pool rows of `h` listed in `span`.
pub fn mean_rows(h: &Array2<f64>, span: &[usize]) -> Array1<f64> {
    let mut out = Array1::<f64>::zeros(h.ncols());
    for &i in span {
        out += &h.row(i);
    }
    out.mapv_inplace(|v| v / span.len() as f64);
    out
}

/// Max-pool rows of `h` listed in `span`; also returns the argmax row per
/// column for the backward pass.
pub fn max_rows(h: &Array2<f64>, span: &[usize]) -> (Array1<f64>, Vec<usize>) {
    let cols = h.ncols();
    let mut out = Array1::<f64>::from_elem(cols, f64::NEG_INFINITY);
    let mut arg = vec![span[0]; cols];
    for &i in span {
        for c in 0..cols {
            if h[[i, c]] > out[c] {
                out[c] = h[[i, c]];
                arg[c] = i;
            }
        }
    }
    (out, arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;
    use crate::features::encoder::HashEncoder;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sent(words: &[&str]) -> Sentence {
        let n = words.len();
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, w)| Token {
                surface: w.to_string(),
                pos: "NN".into(),
                ner: "O".into(),
                dep_label: "dep".into(),
                head: if i == 0 { None } else { Some(i - 1) },
            })
            .collect();
        let _ = n;
        Sentence { tokens, entities: vec![], triggers: vec![], arguments: vec![] }
    }

    fn backbone() -> Backbone {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sent(&["oil", "rose"]);
        let vocabs = ChannelTables::vocabs_from(std::iter::once(&s));
        Backbone::new(
            Arc::new(HashEncoder::new(8, 1)),
            ChannelConfig::default(),
            vocabs,
            16,
            &mut rng,
        )
    }

    #[test]
    fn forward_shape_and_determinism() {
        let b = backbone();
        let s = sent(&["oil", "rose", "today"]);
        let (h1, _) = b.forward(&s).unwrap();
        let (h2, _) = b.forward(&s).unwrap();
        assert_eq!(h1.shape(), &[3, 16]);
        assert_eq!(h1, h2);
    }

    #[test]
    fn digest_changes_with_parameters() {
        let mut b = backbone();
        let before = b.params_digest();
        assert_eq!(before, b.clone_state().params_digest());
        b.trunk.w[[0, 0]] += 1e-12;
        assert_ne!(before, b.params_digest());
    }

    #[test]
    fn backward_matches_finite_differences_on_trunk() {
        let b = backbone();
        let s = sent(&["oil", "rose"]);
        let (h, cache) = b.forward(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Array2::from_shape_fn(h.dim(), |_| rng.random_range(-1.0..1.0));
        let grads = b.backward(&s, &cache, &g);
        let loss = |bb: &Backbone| {
            let (h, _) = bb.forward(&s).unwrap();
            (&h * &g).sum()
        };
        let eps = 1e-6;
        for &(i, j) in &[(0usize, 0usize), (3, 5), (10, 15)] {
            let mut plus = b.clone_state();
            plus.trunk.w[[i, j]] += eps;
            let mut minus = b.clone_state();
            minus.trunk.w[[i, j]] -= eps;
            let num = (loss(&plus) - loss(&minus)) / (2.0 * eps);
            assert!(
                (num - grads.trunk_w[[i, j]]).abs() < 1e-5,
                "trunk dW[{i},{j}]: {num} vs {}",
                grads.trunk_w[[i, j]]
            );
        }
        // one embedding-table entry (dep table, row of "dep")
        let row = b.tables.dep.vocab.index("dep");
        let mut plus = b.clone_state();
        plus.tables.dep.weights[[row, 2]] += eps;
        let mut minus = b.clone_state();
        minus.tables.dep.weights[[row, 2]] -= eps;
        let num = (loss(&plus) - loss(&minus)) / (2.0 * eps);
        assert!((num - grads.dep[[row, 2]]).abs() < 1e-5);
    }

    #[test]
    fn pooling_helpers() {
        let h = ndarray::array![[1.0, 5.0], [3.0, 1.0], [2.0, 2.0]];
        assert_eq!(mean_rows(&h, &[0, 1]), ndarray::array![2.0, 3.0]);
        let (mx, arg) = max_rows(&h, &[0, 1, 2]);
        assert_eq!(mx, ndarray::array![3.0, 5.0]);
        assert_eq!(arg, vec![1, 0]);
    }
}
