//! Argument role prediction: a GCN over the pruned contextual parse tree of
//! each candidate trigger-entity pair, read out as
//! `[trigger node || entity node || max-pool over kept nodes]` into a linear
//! classifier over the role inventory (NONE included).

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::graph::{
    expand_k, gcn_backward, gcn_forward, normalized_adjacency, path_prune, DepTree, GcnCache,
    GcnLayerParams, GraphError,
};
use crate::model::TypedSpan;
use crate::nn::{argmax, softmax_vec, AdamState, Linear};

use super::backbone::{max_rows, Backbone};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArpHead {
    pub roles: Vec<String>,
    pub gcn: Vec<GcnLayerParams>,
    pub out: Linear,
    pub k: usize,
}

/// Forward state of one candidate pair.
pub struct ArpPairCache {
    kept: Vec<usize>,
    a_norm: Array2<f64>,
    gcn_cache: GcnCache,
    gcn_out: Array2<f64>,
    trig_pos: usize,
    ent_pos: usize,
    max_arg: Vec<usize>,
    readout: Array1<f64>,
}

/// Accumulated parameter gradients across the pairs of one update.
pub struct ArpGrads {
    pub gcn: Vec<(Array2<f64>, Array1<f64>)>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

pub struct ArpOpt {
    gcn: Vec<(AdamState, AdamState)>,
    out_w: AdamState,
    out_b: AdamState,
}

/// Every (trigger, entity) candidate within one sentence: the full cross
/// product, in index order.
pub fn enumerate_pairs(n_triggers: usize, n_entities: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n_triggers * n_entities);
    for t in 0..n_triggers {
        for e in 0..n_entities {
            out.push((t, e));
        }
    }
    out
}

impl ArpHead {
    pub fn new(
        roles: Vec<String>,
        hidden_dim: usize,
        gcn_dim: usize,
        gcn_layers: usize,
        k: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(gcn_layers >= 1);
        let mut gcn = Vec::with_capacity(gcn_layers);
        let mut in_dim = hidden_dim;
        for _ in 0..gcn_layers {
            let bound = (6.0 / (in_dim + gcn_dim) as f64).sqrt();
            gcn.push(GcnLayerParams {
                w: Array2::from_shape_fn((in_dim, gcn_dim), |_| rng.random_range(-bound..bound)),
                b: Array1::zeros(gcn_dim),
            });
            in_dim = gcn_dim;
        }
        let out = Linear::new(3 * gcn_dim, roles.len(), rng);
        ArpHead { roles, gcn, out, k }
    }

    pub fn n_roles(&self) -> usize {
        self.roles.len()
    }

    pub fn role_index(&self, role: &str) -> Option<usize> {
        self.roles.iter().position(|r| r == role)
    }

    pub fn gcn_dim(&self) -> usize {
        self.gcn.last().expect("at least one layer").out_dim()
    }

    /// Logits for one candidate pair. Anchors are the first tokens of the
    /// trigger and entity spans.
    pub fn forward_pair(
        &self,
        hidden: &Array2<f64>,
        tree: &DepTree,
        trigger_tok: usize,
        entity_tok: usize,
    ) -> Result<(Array1<f64>, ArpPairCache), GraphError> {
        let sub = path_prune(tree, trigger_tok, entity_tok)?;
        let sub = expand_k(tree, &sub, self.k);
        let kept = sub.kept_sorted();
        let a_norm = normalized_adjacency(tree, &sub);
        let mut h_kept = Array2::<f64>::zeros((kept.len(), hidden.ncols()));
        for (i, &tok) in kept.iter().enumerate() {
            h_kept.row_mut(i).assign(&hidden.row(tok));
        }
        let (gcn_out, gcn_cache) = gcn_forward(&h_kept, &a_norm, &self.gcn, true)?;
        let trig_pos = kept.binary_search(&trigger_tok).expect("anchor kept");
        let ent_pos = kept.binary_search(&entity_tok).expect("anchor kept");
        let all_rows: Vec<usize> = (0..kept.len()).collect();
        let (max_pool, max_arg) = max_rows(&gcn_out, &all_rows);
        let d = self.gcn_dim();
        let mut readout = Array1::<f64>::zeros(3 * d);
        readout.slice_mut(ndarray::s![0..d]).assign(&gcn_out.row(trig_pos));
        readout.slice_mut(ndarray::s![d..2 * d]).assign(&gcn_out.row(ent_pos));
        readout.slice_mut(ndarray::s![2 * d..3 * d]).assign(&max_pool);
        let logits = self.out.forward(&readout.clone().insert_axis(ndarray::Axis(0)));
        let logits = logits.row(0).to_owned();
        Ok((
            logits,
            ArpPairCache { kept, a_norm, gcn_cache, gcn_out, trig_pos, ent_pos, max_arg, readout },
        ))
    }

    /// Backward for one pair: accumulates parameter grads and per-token
    /// hidden-state gradients.
    pub fn backward_pair(
        &self,
        cache: &ArpPairCache,
        d_logits: &Array1<f64>,
        grads: &mut ArpGrads,
        d_hidden: &mut Array2<f64>,
    ) {
        let d = self.gcn_dim();
        let d_logits_2d = d_logits.clone().insert_axis(ndarray::Axis(0));
        let readout_2d = cache.readout.clone().insert_axis(ndarray::Axis(0));
        let (d_readout, d_out_w, d_out_b) = self.out.backward(&readout_2d, &d_logits_2d);
        grads.out_w += &d_out_w;
        grads.out_b += &d_out_b;
        let d_readout = d_readout.row(0).to_owned();

        let mut d_gcn_out = Array2::<f64>::zeros(cache.gcn_out.dim());
        d_gcn_out
            .row_mut(cache.trig_pos)
            .zip_mut_with(&d_readout.slice(ndarray::s![0..d]), |a, &b| *a += b);
        d_gcn_out
            .row_mut(cache.ent_pos)
            .zip_mut_with(&d_readout.slice(ndarray::s![d..2 * d]), |a, &b| *a += b);
        for c in 0..d {
            d_gcn_out[[cache.max_arg[c], c]] += d_readout[2 * d + c];
        }

        let gcn_grads = gcn_backward(&cache.a_norm, &self.gcn, &cache.gcn_cache, &d_gcn_out);
        for (li, (dw, db)) in gcn_grads.d_layers.into_iter().enumerate() {
            grads.gcn[li].0 += &dw;
            grads.gcn[li].1 += &db;
        }
        for (i, &tok) in cache.kept.iter().enumerate() {
            let g = gcn_grads.d_input.row(i);
            d_hidden.row_mut(tok).zip_mut_with(&g, |a, &b| *a += b);
        }
    }

    pub fn zero_grads(&self) -> ArpGrads {
        ArpGrads {
            gcn: self
                .gcn
                .iter()
                .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.len())))
                .collect(),
            out_w: Array2::zeros(self.out.w.dim()),
            out_b: Array1::zeros(self.out.b.len()),
        }
    }

    pub fn new_opt(&self) -> ArpOpt {
        ArpOpt {
            gcn: self
                .gcn
                .iter()
                .map(|l| (AdamState::new(l.w.len()), AdamState::new(l.b.len())))
                .collect(),
            out_w: AdamState::new(self.out.w.len()),
            out_b: AdamState::new(self.out.b.len()),
        }
    }

    pub fn apply_grads(&mut self, grads: &ArpGrads, opt: &mut ArpOpt, lr: f64) {
        for (li, layer) in self.gcn.iter_mut().enumerate() {
            opt.gcn[li].0.step(layer.w.iter_mut(), grads.gcn[li].0.iter(), lr);
            opt.gcn[li].1.step(layer.b.iter_mut(), grads.gcn[li].1.iter(), lr);
        }
        opt.out_w.step(self.out.w.iter_mut(), grads.out_w.iter(), lr);
        opt.out_b.step(self.out.b.iter_mut(), grads.out_b.iter(), lr);
    }

    /// Role distribution for one pair; probabilities sum to 1.
    pub fn predict_probs(
        &self,
        hidden: &Array2<f64>,
        tree: &DepTree,
        trigger: &TypedSpan,
        entity: &TypedSpan,
    ) -> Result<Array1<f64>, GraphError> {
        let (logits, _) = self.forward_pair(hidden, tree, trigger.start, entity.start)?;
        Ok(softmax_vec(&logits))
    }

    /// Argmax role for one pair (lowest index wins ties).
    pub fn predict_role(
        &self,
        backbone: &Backbone,
        sent: &Sentence,
        trigger: &TypedSpan,
        entity: &TypedSpan,
    ) -> Result<String, GraphError> {
        let (hidden, _) = backbone
            .forward(sent)
            .map_err(|e| GraphError::InvalidTree(format!("encoder failure: {e}")))?;
        let tree = sent.dep_tree()?;
        let (logits, _) = self.forward_pair(&hidden, &tree, trigger.start, entity.start)?;
        let idx = argmax(logits.as_slice().expect("contiguous"));
        Ok(self.roles[idx].clone())
    }
}
