//! The three interchangeable span strategies feeding the event-property
//! classifiers: a fixed window around the trigger, the trigger's dependency
//! subtree, and self-attentive pooling.
//!
//! Each strategy turns one event trigger into one vector. The attentive
//! strategy concatenates the trigger-token mean with an attention-weighted
//! combination over the whole sentence, so cue words far from the trigger
//! stay reachable.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::graph::DepTree;
use crate::model::TypedSpan;
use crate::nn::{attentive_pool, attentive_pool_backward, AttentiveCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpanStrategy {
    /// Tokens `trigger-r ..= trigger+r`, concatenated (zero-padded at the
    /// sentence edges). `r = 1` is the 3-token window.
    FixedWindow { r: usize },
    /// Mean over the trigger's dependency subtree.
    DepSubtree,
    /// Trigger-token mean concatenated with sentence-wide attentive pooling.
    SelfAttentiveSpan,
}

impl SpanStrategy {
    pub fn name(&self) -> String {
        match self {
            SpanStrategy::FixedWindow { r } => format!("fixed-window-{r}"),
            SpanStrategy::DepSubtree => "dep-subtree".to_string(),
            SpanStrategy::SelfAttentiveSpan => "self-attentive".to_string(),
        }
    }

    pub fn parse(name: &str, r: usize) -> Option<SpanStrategy> {
        match name {
            "window" | "fixed-window" => Some(SpanStrategy::FixedWindow { r }),
            "subtree" | "dep-subtree" => Some(SpanStrategy::DepSubtree),
            "attentive" | "self-attentive" => Some(SpanStrategy::SelfAttentiveSpan),
            _ => None,
        }
    }

    /// Width of the produced vector for a given hidden width.
    pub fn rep_dim(&self, hidden: usize) -> usize {
        match self {
            SpanStrategy::FixedWindow { r } => (2 * r + 1) * hidden,
            SpanStrategy::DepSubtree => hidden,
            SpanStrategy::SelfAttentiveSpan => 2 * hidden,
        }
    }

    /// Whether the strategy carries a trainable attention scoring vector.
    pub fn needs_attention(&self) -> bool {
        matches!(self, SpanStrategy::SelfAttentiveSpan)
    }
}

/// Window token indices `[head-r, head+r]` clamped to the sentence. The
/// trigger head is the first token of the trigger span.
pub fn extract_span_window(n_tokens: usize, trigger_head: usize, r: usize) -> Vec<usize> {
    let lo = trigger_head.saturating_sub(r);
    let hi = (trigger_head + r).min(n_tokens.saturating_sub(1));
    (lo..=hi).collect()
}

/// The trigger head token plus all its dependency descendants, ascending.
pub fn extract_span_subtree(tree: &DepTree, trigger_head: usize) -> Vec<usize> {
    tree.subtree(trigger_head)
}

/// Cache for the backward pass of one span representation.
pub enum SpanRepCache {
    Window { slots: Vec<(usize, usize)> }, // (slot, token)
    Subtree { span: Vec<usize> },
    Attentive { trigger_tokens: Vec<usize>, attn: AttentiveCache },
}

/// Builds the strategy's vector for one trigger over sentence hidden states.
/// `attn_w` must be `Some` exactly for the attentive strategy.
pub fn span_representation(
    strategy: SpanStrategy,
    hidden: &Array2<f64>,
    tree: &DepTree,
    trigger: &TypedSpan,
    attn_w: Option<&Array1<f64>>,
) -> (Array1<f64>, SpanRepCache) {
    let n = hidden.nrows();
    let h = hidden.ncols();
    let head = trigger.start.min(n - 1);
    match strategy {
        SpanStrategy::FixedWindow { r } => {
            let mut vec = Array1::<f64>::zeros((2 * r + 1) * h);
            let mut slots = Vec::new();
            for (slot, pos) in (-(r as isize)..=r as isize).enumerate() {
                let tok = head as isize + pos;
                if tok < 0 || tok >= n as isize {
                    continue;
                }
                let tok = tok as usize;
                vec.slice_mut(ndarray::s![slot * h..(slot + 1) * h]).assign(&hidden.row(tok));
                slots.push((slot, tok));
            }
            (vec, SpanRepCache::Window { slots })
        }
        SpanStrategy::DepSubtree => {
            let span = extract_span_subtree(tree, head);
            let mut vec = Array1::<f64>::zeros(h);
            for &t in &span {
                vec += &hidden.row(t);
            }
            vec.mapv_inplace(|v| v / span.len() as f64);
            (vec, SpanRepCache::Subtree { span })
        }
        SpanStrategy::SelfAttentiveSpan => {
            let w = attn_w.expect("attentive strategy needs a scoring vector");
            let trigger_tokens: Vec<usize> =
                (trigger.start..=trigger.end.min(n - 1)).collect();
            let mut vec = Array1::<f64>::zeros(2 * h);
            let mut trig_mean = Array1::<f64>::zeros(h);
            for &t in &trigger_tokens {
                trig_mean += &hidden.row(t);
            }
            trig_mean.mapv_inplace(|v| v / trigger_tokens.len() as f64);
            let sentence_span: Vec<usize> = (0..n).collect();
            let (pooled, attn) = attentive_pool(hidden, &sentence_span, w);
            vec.slice_mut(ndarray::s![0..h]).assign(&trig_mean);
            vec.slice_mut(ndarray::s![h..2 * h]).assign(&pooled);
            (vec, SpanRepCache::Attentive { trigger_tokens, attn })
        }
    }
}

/// Backward pass: accumulates `d_hidden` and returns the attention-vector
/// gradient for the attentive strategy.
pub fn span_representation_backward(
    hidden: &Array2<f64>,
    attn_w: Option<&Array1<f64>>,
    cache: &SpanRepCache,
    d_vec: &Array1<f64>,
    d_hidden: &mut Array2<f64>,
) -> Option<Array1<f64>> {
    let h = hidden.ncols();
    match cache {
        SpanRepCache::Window { slots } => {
            for &(slot, tok) in slots {
                let g = d_vec.slice(ndarray::s![slot * h..(slot + 1) * h]);
                d_hidden.row_mut(tok).zip_mut_with(&g, |a, &b| *a += b);
            }
            None
        }
        SpanRepCache::Subtree { span } => {
            let scale = 1.0 / span.len() as f64;
            for &tok in span {
                d_hidden.row_mut(tok).zip_mut_with(d_vec, |a, &b| *a += b * scale);
            }
            None
        }
        SpanRepCache::Attentive { trigger_tokens, attn } => {
            let w = attn_w.expect("attentive strategy needs a scoring vector");
            let d_trig = d_vec.slice(ndarray::s![0..h]).to_owned();
            let d_pool = d_vec.slice(ndarray::s![h..2 * h]).to_owned();
            let scale = 1.0 / trigger_tokens.len() as f64;
            for &tok in trigger_tokens {
                d_hidden.row_mut(tok).zip_mut_with(&d_trig, |a, &b| *a += b * scale);
            }
            Some(attentive_pool_backward(hidden, w, attn, &d_pool, d_hidden))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_hidden(n: usize, h: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, h), |_| rng.random_range(-1.0..1.0))
    }

    fn chain_tree(n: usize) -> DepTree {
        DepTree::new(
            (0..n).map(|i| if i == 0 { None } else { Some(i - 1) }).collect(),
            vec!["dep".to_string(); n],
        )
        .unwrap()
    }

    #[test]
    fn window_zero_is_trigger_only() {
        assert_eq!(extract_span_window(5, 2, 0), vec![2]);
    }

    #[test]
    fn window_clamps_to_bounds() {
        assert_eq!(extract_span_window(4, 1, 3), vec![0, 1, 2, 3]);
        assert_eq!(extract_span_window(4, 0, 1), vec![0, 1]);
    }

    #[test]
    fn subtree_of_leaf_and_root() {
        let tree = chain_tree(4);
        assert_eq!(extract_span_subtree(&tree, 3), vec![3]);
        assert_eq!(extract_span_subtree(&tree, 0), vec![0, 1, 2, 3]);
    }

    #[test]
    fn window_rep_ignores_outside_tokens() {
        let tree = chain_tree(6);
        let trigger = TypedSpan::new(2, 2, "X");
        let strategy = SpanStrategy::FixedWindow { r: 1 };
        let h1 = rand_hidden(6, 4, 1);
        let mut h2 = h1.clone();
        h2.row_mut(5).fill(9.0); // outside the window
        let (v1, _) = span_representation(strategy, &h1, &tree, &trigger, None);
        let (v2, _) = span_representation(strategy, &h2, &tree, &trigger, None);
        assert_eq!(v1, v2);
        // ... but inside tokens matter
        let mut h3 = h1.clone();
        h3.row_mut(1).fill(9.0);
        let (v3, _) = span_representation(strategy, &h3, &tree, &trigger, None);
        assert_ne!(v1, v3);
    }

    #[test]
    fn subtree_rep_ignores_non_descendants() {
        let tree = chain_tree(5);
        let trigger = TypedSpan::new(2, 2, "X");
        let h1 = rand_hidden(5, 4, 2);
        let mut h2 = h1.clone();
        h2.row_mut(0).fill(7.0); // ancestor, not in subtree of 2
        let (v1, _) = span_representation(SpanStrategy::DepSubtree, &h1, &tree, &trigger, None);
        let (v2, _) = span_representation(SpanStrategy::DepSubtree, &h2, &tree, &trigger, None);
        assert_eq!(v1, v2);
    }

    #[test]
    fn attentive_single_token_sentence_is_that_token() {
        let tree = chain_tree(1);
        let h = rand_hidden(1, 3, 3);
        let w = Array1::from_vec(vec![0.1, 0.2, 0.3]);
        let trigger = TypedSpan::new(0, 0, "X");
        let (v, _) =
            span_representation(SpanStrategy::SelfAttentiveSpan, &h, &tree, &trigger, Some(&w));
        // both halves equal the single token's row
        for c in 0..3 {
            assert!((v[c] - h[[0, c]]).abs() < 1e-12);
            assert!((v[3 + c] - h[[0, c]]).abs() < 1e-12);
        }
    }

    #[test]
    fn attentive_gradient_matches_finite_differences() {
        let tree = chain_tree(5);
        let h = rand_hidden(5, 4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = Array1::from_shape_fn(4, |_| rng.random_range(-1.0..1.0));
        let g = Array1::from_shape_fn(8, |_| rng.random_range(-1.0..1.0));
        let trigger = TypedSpan::new(1, 2, "X");
        let strategy = SpanStrategy::SelfAttentiveSpan;

        let loss = |hh: &Array2<f64>, ww: &Array1<f64>| {
            let (v, _) = span_representation(strategy, hh, &tree, &trigger, Some(ww));
            v.dot(&g)
        };
        let (_, cache) = span_representation(strategy, &h, &tree, &trigger, Some(&w));
        let mut d_hidden = Array2::<f64>::zeros(h.dim());
        let d_w =
            span_representation_backward(&h, Some(&w), &cache, &g, &mut d_hidden).unwrap();

        let eps = 1e-6;
        for i in 0..4 {
            let mut wp = w.clone();
            wp[i] += eps;
            let mut wm = w.clone();
            wm[i] -= eps;
            let num = (loss(&h, &wp) - loss(&h, &wm)) / (2.0 * eps);
            assert!((num - d_w[i]).abs() < 1e-6, "d_w[{i}]: {num} vs {}", d_w[i]);
        }
        for t in 0..5 {
            for c in 0..4 {
                let mut hp = h.clone();
                hp[[t, c]] += eps;
                let mut hm = h.clone();
                hm[[t, c]] -= eps;
                let num = (loss(&hp, &w) - loss(&hm, &w)) / (2.0 * eps);
                assert!(
                    (num - d_hidden[[t, c]]).abs() < 1e-6,
                    "d_h[{t},{c}]: {num} vs {}",
                    d_hidden[[t, c]]
                );
            }
        }
    }

    #[test]
    fn rep_dims_are_consistent() {
        let tree = chain_tree(4);
        let h = rand_hidden(4, 6, 7);
        let w = Array1::zeros(6);
        let trigger = TypedSpan::new(1, 1, "X");
        for strategy in [
            SpanStrategy::FixedWindow { r: 2 },
            SpanStrategy::DepSubtree,
            SpanStrategy::SelfAttentiveSpan,
        ] {
            let attn = strategy.needs_attention().then_some(&w);
            let (v, _) = span_representation(strategy, &h, &tree, &trigger, attn);
            assert_eq!(v.len(), strategy.rep_dim(6), "{}", strategy.name());
        }
    }
}
