//! Multi-channel feature assembly: contextual word vectors concatenated
//! with learned POS, NER, and dependency-tag embeddings, in that fixed
//! channel order.

pub mod encoder;

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use encoder::{ContextualEncoder, EncoderError};

/// Which channels to append to the word vectors, and how wide each is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub use_pos: bool,
    pub use_ner: bool,
    pub use_dep: bool,
    pub pos_dim: usize,
    pub ner_dim: usize,
    pub dep_dim: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            use_pos: true,
            use_ner: true,
            use_dep: true,
            pos_dim: 8,
            ner_dim: 8,
            dep_dim: 8,
        }
    }
}

impl ChannelConfig {
    /// Total feature width for a given encoder width.
    pub fn feature_width(&self, encoder_dim: usize) -> usize {
        encoder_dim
            + if self.use_pos { self.pos_dim } else { 0 }
            + if self.use_ner { self.ner_dim } else { 0 }
            + if self.use_dep { self.dep_dim } else { 0 }
    }
}

/// Closed tag vocabulary with an OOV row at index 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagVocab {
    tags: Vec<String>,
}

pub const OOV_TAG: &str = "<unk>";

impl TagVocab {
    /// Builds from observed tags, sorted for stable indexing.
    pub fn from_tags<'a>(tags: impl Iterator<Item = &'a str>) -> Self {
        let mut set: Vec<String> = tags.map(|t| t.to_string()).collect();
        set.sort();
        set.dedup();
        set.retain(|t| t != OOV_TAG);
        let mut all = vec![OOV_TAG.to_string()];
        all.extend(set);
        TagVocab { tags: all }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Index of a tag; unknown tags route to the OOV row (0).
    pub fn index(&self, tag: &str) -> usize {
        self.tags[1..]
            .binary_search_by(|t| t.as_str().cmp(tag))
            .map(|p| p + 1)
            .unwrap_or(0)
    }

    pub fn is_known(&self, tag: &str) -> bool {
        self.index(tag) != 0 || tag == OOV_TAG
    }
}

/// Learned embedding table over a tag vocabulary; trained jointly with each
/// task head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub vocab: TagVocab,
    pub weights: Array2<f64>,
}

impl EmbeddingTable {
    /// Uniform init in [-0.1, 0.1].
    pub fn new(vocab: TagVocab, dim: usize, rng: &mut impl Rng) -> Self {
        let weights =
            Array2::from_shape_fn((vocab.len(), dim), |_| rng.random_range(-0.1..0.1));
        EmbeddingTable { vocab, weights }
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn row(&self, tag: &str) -> ndarray::ArrayView1<'_, f64> {
        self.weights.row(self.vocab.index(tag))
    }
}

/// Encodes sentence tokens through the contextual encoder; one row per
/// token, subwords already pooled by the encoder.
pub fn encode_tokens(
    encoder: &dyn ContextualEncoder,
    sentence: &Sentence,
) -> Result<Array2<f64>, EncoderError> {
    let surfaces = sentence.surfaces();
    let out = encoder.encode(&surfaces)?;
    if out.nrows() != surfaces.len() {
        return Err(EncoderError::TokenCountMismatch {
            got: out.nrows(),
            expected: surfaces.len(),
        });
    }
    Ok(out)
}

/// The per-sentence channel tables bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTables {
    pub pos: EmbeddingTable,
    pub ner: EmbeddingTable,
    pub dep: EmbeddingTable,
}

impl ChannelTables {
    pub fn new(
        cfg: &ChannelConfig,
        pos_vocab: TagVocab,
        ner_vocab: TagVocab,
        dep_vocab: TagVocab,
        rng: &mut impl Rng,
    ) -> Self {
        ChannelTables {
            pos: EmbeddingTable::new(pos_vocab, cfg.pos_dim, rng),
            ner: EmbeddingTable::new(ner_vocab, cfg.ner_dim, rng),
            dep: EmbeddingTable::new(dep_vocab, cfg.dep_dim, rng),
        }
    }

    /// Builds tag vocabularies from a corpus of sentences.
    pub fn vocabs_from<'a>(
        sentences: impl Iterator<Item = &'a Sentence> + Clone,
    ) -> (TagVocab, TagVocab, TagVocab) {
        let pos = TagVocab::from_tags(
            sentences.clone().flat_map(|s| s.tokens.iter()).map(|t| t.pos.as_str()),
        );
        let ner = TagVocab::from_tags(
            sentences.clone().flat_map(|s| s.tokens.iter()).map(|t| t.ner.as_str()),
        );
        let dep = TagVocab::from_tags(
            sentences.flat_map(|s| s.tokens.iter()).map(|t| t.dep_label.as_str()),
        );
        (pos, ner, dep)
    }
}

/// A per-token feature matrix and the count of tags routed to OOV rows.
pub struct AssembledFeatures {
    pub matrix: Array2<f64>,
    pub oov_tags: usize,
}

/// Concatenates `[word || pos || ner || dep]` per token, honoring the channel
/// flags. Unknown tags land on the OOV row and are tallied.
pub fn assemble_channels(
    word: &Array2<f64>,
    sentence: &Sentence,
    cfg: &ChannelConfig,
    tables: &ChannelTables,
) -> AssembledFeatures {
    let n = sentence.len();
    assert_eq!(word.nrows(), n, "word matrix must align with tokens");
    let width = cfg.feature_width(word.ncols());
    let mut matrix = Array2::<f64>::zeros((n, width));
    let mut oov_tags = 0;
    for (i, token) in sentence.tokens.iter().enumerate() {
        let mut col = 0;
        matrix
            .row_mut(i)
            .slice_axis_mut(Axis(0), (col..col + word.ncols()).into())
            .assign(&word.row(i));
        col += word.ncols();
        let mut push = |table: &EmbeddingTable, tag: &str, col: &mut usize, oov: &mut usize| {
            if !table.vocab.is_known(tag) {
                *oov += 1;
            }
            matrix
                .row_mut(i)
                .slice_axis_mut(Axis(0), (*col..*col + table.dim()).into())
                .assign(&table.row(tag));
            *col += table.dim();
        };
        if cfg.use_pos {
            push(&tables.pos, &token.pos, &mut col, &mut oov_tags);
        }
        if cfg.use_ner {
            push(&tables.ner, &token.ner, &mut col, &mut oov_tags);
        }
        if cfg.use_dep {
            push(&tables.dep, &token.dep_label, &mut col, &mut oov_tags);
        }
    }
    if oov_tags > 0 {
        log::warn!("{oov_tags} tags routed to OOV rows");
    }
    AssembledFeatures { matrix, oov_tags }
}

#[cfg(test)]
mod tests {
    use super::encoder::HashEncoder;
    use super::*;
    use crate::corpus::Token;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sentence(words: &[(&str, &str, &str, &str)]) -> Sentence {
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, (surface, pos, ner, dep))| Token {
                surface: surface.to_string(),
                pos: pos.to_string(),
                ner: ner.to_string(),
                dep_label: dep.to_string(),
                head: if i == 0 { None } else { Some(i - 1) },
            })
            .collect();
        Sentence { tokens, entities: vec![], triggers: vec![], arguments: vec![] }
    }

    fn test_tables(cfg: &ChannelConfig, sent: &Sentence) -> ChannelTables {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (pos, ner, dep) = ChannelTables::vocabs_from(std::iter::once(sent));
        ChannelTables::new(cfg, pos, ner, dep, &mut rng)
    }

    #[test]
    fn encode_tokens_has_one_row_per_token() {
        let enc = HashEncoder::new(16, 1);
        let sent = sentence(&[
            ("Oil", "NN", "O", "nsubj"),
            ("rose", "VB", "O", "root"),
            ("sharply", "RB", "O", "dep"),
            (".", ".", "O", "punct"),
            ("today", "NN", "O", "nmod"),
        ]);
        let m = encode_tokens(&enc, &sent).unwrap();
        assert_eq!(m.shape(), &[5, 16]);
        // Deterministic in eval mode.
        assert_eq!(m, encode_tokens(&enc, &sent).unwrap());
    }

    #[test]
    fn disabled_channels_leave_word_matrix() {
        let enc = HashEncoder::new(16, 1);
        let sent = sentence(&[("Oil", "NN", "O", "nsubj"), ("rose", "VB", "O", "root")]);
        let cfg = ChannelConfig {
            use_pos: false,
            use_ner: false,
            use_dep: false,
            ..ChannelConfig::default()
        };
        let tables = test_tables(&cfg, &sent);
        let word = encode_tokens(&enc, &sent).unwrap();
        let out = assemble_channels(&word, &sent, &cfg, &tables);
        assert_eq!(out.matrix, word);
    }

    #[test]
    fn feature_width_adds_up() {
        let enc = HashEncoder::new(16, 1);
        let sent = sentence(&[("Oil", "NN", "O", "nsubj"), ("rose", "VB", "O", "root")]);
        let cfg = ChannelConfig {
            use_pos: true,
            use_ner: true,
            use_dep: true,
            pos_dim: 4,
            ner_dim: 4,
            dep_dim: 4,
        };
        assert_eq!(cfg.feature_width(16), 28);
        let tables = test_tables(&cfg, &sent);
        let word = encode_tokens(&enc, &sent).unwrap();
        let out = assemble_channels(&word, &sent, &cfg, &tables);
        assert_eq!(out.matrix.shape(), &[2, 28]);
        assert_eq!(out.oov_tags, 0);
    }

    #[test]
    fn dep_slice_matches_table_row() {
        let enc = HashEncoder::new(8, 1);
        let sent = sentence(&[("not", "RB", "O", "neg"), ("fall", "VB", "O", "root")]);
        let cfg = ChannelConfig::default();
        let tables = test_tables(&cfg, &sent);
        let word = encode_tokens(&enc, &sent).unwrap();
        let out = assemble_channels(&word, &sent, &cfg, &tables);
        let dep_start = 8 + cfg.pos_dim + cfg.ner_dim;
        let slice = out.matrix.row(0);
        let slice = slice.slice(ndarray::s![dep_start..dep_start + cfg.dep_dim]);
        assert_eq!(slice, tables.dep.row("neg"));
    }

    #[test]
    fn unknown_tag_routes_to_oov_and_tallies() {
        let enc = HashEncoder::new(8, 1);
        let train = sentence(&[("oil", "NN", "O", "nsubj"), ("rose", "VB", "O", "root")]);
        let cfg = ChannelConfig::default();
        let tables = test_tables(&cfg, &train);
        let test = sentence(&[("oil", "WEIRD", "O", "nsubj")]);
        let word = encode_tokens(&enc, &test).unwrap();
        let out = assemble_channels(&word, &test, &cfg, &tables);
        assert_eq!(out.oov_tags, 1);
        let pos_slice = out.matrix.row(0);
        let pos_slice = pos_slice.slice(ndarray::s![8..8 + cfg.pos_dim]);
        assert_eq!(pos_slice, tables.pos.weights.row(0));
    }

    #[test]
    fn row_permutation_equivariance() {
        // Feature assembly is per-token: reordering tokens reorders rows.
        let enc = HashEncoder::new(8, 1);
        let cfg = ChannelConfig::default();
        let a = sentence(&[("oil", "NN", "O", "nsubj"), ("rose", "VB", "O", "root")]);
        let tables = test_tables(&cfg, &a);
        // Same tokens, swapped; note hash vectors are position-bucketed, so
        // compare against a same-position recomputation.
        let b = sentence(&[("rose", "VB", "O", "root"), ("oil", "NN", "O", "nsubj")]);
        let fa = assemble_channels(&encode_tokens(&enc, &a).unwrap(), &a, &cfg, &tables);
        let fb = assemble_channels(&encode_tokens(&enc, &b).unwrap(), &b, &cfg, &tables);
        // Channel slices (position-independent) must swap exactly.
        let width = cfg.feature_width(8);
        let chan = ndarray::s![8..width];
        assert_eq!(fa.matrix.row(0).slice(chan), fb.matrix.row(1).slice(chan));
        assert_eq!(fa.matrix.row(1).slice(chan), fb.matrix.row(0).slice(chan));
    }
}
