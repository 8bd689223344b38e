//! Dependency-tree algorithms and the graph-convolution kernel used by
//! argument role prediction: shortest-path pruning between a trigger and a
//! candidate entity, k-hop context expansion, normalized adjacency over the
//! induced subgraph, and GCN layers with analytic gradients.
//!
//! Edges are treated as undirected for pruning and adjacency; dependency
//! direction survives only through the dep-label feature channel.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("token index {0} out of range for tree of {1} tokens")]
    IndexOutOfRange(usize, usize),
    #[error("invalid dependency tree: {0}")]
    InvalidTree(String),
    #[error("pruning failed: anchors {0} and {1} are not connected")]
    PruningFailure(usize, usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// A sentence dependency tree: one head per token, exactly one root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepTree {
    heads: Vec<Option<usize>>,
    labels: Vec<String>,
}

impl DepTree {
    /// Builds a validated tree: single root, in-range heads, acyclic.
    pub fn new(heads: Vec<Option<usize>>, labels: Vec<String>) -> Result<Self, GraphError> {
        let n = heads.len();
        if labels.len() != n {
            return Err(GraphError::InvalidTree(format!(
                "{} heads but {} labels",
                n,
                labels.len()
            )));
        }
        if n == 0 {
            return Err(GraphError::InvalidTree("empty tree".to_string()));
        }
        let roots = heads.iter().filter(|h| h.is_none()).count();
        if roots != 1 {
            return Err(GraphError::InvalidTree(format!("{roots} roots, expected 1")));
        }
        for (i, head) in heads.iter().enumerate() {
            if let Some(h) = head {
                if *h >= n {
                    return Err(GraphError::InvalidTree(format!(
                        "token {i} has out-of-range head {h}"
                    )));
                }
                if *h == i {
                    return Err(GraphError::InvalidTree(format!("token {i} is its own head")));
                }
            }
        }
        let tree = DepTree { heads, labels };
        // Cycle check: every node must reach the root within n steps.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(h) = tree.heads[cur] {
                cur = h;
                steps += 1;
                if steps > n {
                    return Err(GraphError::InvalidTree(format!(
                        "cycle reachable from token {start}"
                    )));
                }
            }
        }
        Ok(tree)
    }

    /// Builds without validation. Only for constructing deliberately corrupt
    /// trees in tests; `path_prune` detects the corruption at use.
    pub fn new_unchecked(heads: Vec<Option<usize>>, labels: Vec<String>) -> Self {
        DepTree { heads, labels }
    }

    /// Degenerate fallback used when a sentence fails dependency parsing:
    /// every token attaches to its left neighbor, token 0 is the root.
    pub fn right_branching(n: usize) -> Self {
        let heads = (0..n).map(|i| if i == 0 { None } else { Some(i - 1) }).collect();
        DepTree { heads, labels: vec!["dep".to_string(); n] }
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn head(&self, i: usize) -> Option<usize> {
        self.heads[i]
    }

    pub fn heads(&self) -> &[Option<usize>] {
        &self.heads
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn root(&self) -> usize {
        self.heads
            .iter()
            .position(|h| h.is_none())
            .expect("validated tree has a root")
    }

    /// Undirected neighbors: the head plus all dependents.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(h) = self.heads[i] {
            out.push(h);
        }
        for (j, head) in self.heads.iter().enumerate() {
            if *head == Some(i) {
                out.push(j);
            }
        }
        out
    }

    /// The token plus all its descendants, ascending.
    pub fn subtree(&self, i: usize) -> Vec<usize> {
        let n = self.len();
        let mut kept = vec![false; n];
        kept[i] = true;
        // Repeated sweeps; depth is bounded by n.
        loop {
            let mut changed = false;
            for (j, head) in self.heads.iter().enumerate() {
                if let Some(h) = head {
                    if kept[*h] && !kept[j] {
                        kept[j] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (0..n).filter(|&j| kept[j]).collect()
    }
}

/// Nodes retained after pruning: the trigger-entity path plus everything
/// within `k` undirected hops of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrunedSubtree {
    pub kept: BTreeSet<usize>,
    pub k: usize,
}

impl PrunedSubtree {
    pub fn kept_sorted(&self) -> Vec<usize> {
        self.kept.iter().copied().collect()
    }
}

/// Keeps exactly the undirected tree path between `a` and `b` (inclusive).
///
/// Walks both anchors to the root and splices the paths at the lowest common
/// ancestor. A walk that fails to terminate or meet signals a corrupt tree.
pub fn path_prune(tree: &DepTree, a: usize, b: usize) -> Result<PrunedSubtree, GraphError> {
    let n = tree.len();
    if a >= n {
        return Err(GraphError::IndexOutOfRange(a, n));
    }
    if b >= n {
        return Err(GraphError::IndexOutOfRange(b, n));
    }
    let ascend = |start: usize| -> Result<Vec<usize>, GraphError> {
        let mut path = vec![start];
        let mut cur = start;
        while let Some(h) = tree.heads[cur] {
            if h >= n || path.len() > n {
                return Err(GraphError::PruningFailure(a, b));
            }
            path.push(h);
            cur = h;
        }
        Ok(path)
    };
    let path_a = ascend(a)?;
    let path_b = ascend(b)?;
    let in_a: BTreeSet<usize> = path_a.iter().copied().collect();
    let lca = path_b
        .iter()
        .find(|x| in_a.contains(x))
        .copied()
        .ok_or(GraphError::PruningFailure(a, b))?;
    let mut kept = BTreeSet::new();
    for &x in path_a.iter().take_while(|&&x| x != lca) {
        kept.insert(x);
    }
    for &x in path_b.iter().take_while(|&&x| x != lca) {
        kept.insert(x);
    }
    kept.insert(lca);
    Ok(PrunedSubtree { kept, k: 0 })
}

/// Expands a pruned set to all nodes within `k` undirected hops of it.
/// Monotone in `k`; large `k` yields the whole tree.
pub fn expand_k(tree: &DepTree, sub: &PrunedSubtree, k: usize) -> PrunedSubtree {
    let mut kept = sub.kept.clone();
    let mut frontier: Vec<usize> = kept.iter().copied().collect();
    for _ in 0..k {
        let mut next = Vec::new();
        for &node in &frontier {
            for nb in tree.neighbors(node) {
                if kept.insert(nb) {
                    next.push(nb);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    PrunedSubtree { kept, k: sub.k + k }
}

/// Symmetric-normalized adjacency with self-loops over the induced subgraph:
/// `D^{-1/2} (A + I) D^{-1/2}`, rows indexing kept nodes in ascending token
/// order.
pub fn normalized_adjacency(tree: &DepTree, sub: &PrunedSubtree) -> Array2<f64> {
    let kept = sub.kept_sorted();
    let m = kept.len();
    let pos = |tok: usize| kept.binary_search(&tok).ok();
    let mut adj = Array2::<f64>::eye(m);
    for (i, &tok) in kept.iter().enumerate() {
        if let Some(h) = tree.heads[tok] {
            if let Some(j) = pos(h) {
                adj[[i, j]] = 1.0;
                adj[[j, i]] = 1.0;
            }
        }
    }
    let degree: Vec<f64> = (0..m).map(|i| adj.row(i).sum()).collect();
    let mut out = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            if adj[[i, j]] != 0.0 {
                out[[i, j]] = adj[[i, j]] / (degree[i] * degree[j]).sqrt();
            }
        }
    }
    out
}

/// Parameters of one graph-convolution layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnLayerParams {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl GcnLayerParams {
    pub fn in_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.ncols()
    }
}

/// Intermediate activations kept for the backward pass.
pub struct GcnCache {
    /// Layer inputs, one per layer (H_0 .. H_{L-1}).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation A'·H·W + b per layer.
    pre_activations: Vec<Array2<f64>>,
    final_linear: bool,
}

/// Forward pass: per layer `H <- relu(A' H W + b)`; when `final_linear` the
/// last layer skips the relu (classifier-head input).
pub fn gcn_forward(
    h: &Array2<f64>,
    a_norm: &Array2<f64>,
    layers: &[GcnLayerParams],
    final_linear: bool,
) -> Result<(Array2<f64>, GcnCache), GraphError> {
    let m = a_norm.nrows();
    if a_norm.ncols() != m {
        return Err(GraphError::ShapeMismatch(format!(
            "adjacency {}x{} is not square",
            m,
            a_norm.ncols()
        )));
    }
    if h.nrows() != m {
        return Err(GraphError::ShapeMismatch(format!(
            "features have {} rows, adjacency has {m}",
            h.nrows()
        )));
    }
    let mut cur = h.clone();
    let mut cache = GcnCache { inputs: Vec::new(), pre_activations: Vec::new(), final_linear };
    for (li, layer) in layers.iter().enumerate() {
        if layer.in_dim() != cur.ncols() {
            return Err(GraphError::ShapeMismatch(format!(
                "layer {li} expects {} input columns, got {}",
                layer.in_dim(),
                cur.ncols()
            )));
        }
        let mut pre = a_norm.dot(&cur).dot(&layer.w);
        pre += &layer.b;
        cache.inputs.push(cur);
        let last = li == layers.len() - 1;
        cur = if last && final_linear { pre.clone() } else { pre.mapv(|v| v.max(0.0)) };
        cache.pre_activations.push(pre);
    }
    Ok((cur, cache))
}

/// Gradients from one GCN backward pass.
pub struct GcnGrads {
    /// Gradient wrt the input node features H_0.
    pub d_input: Array2<f64>,
    /// Per-layer (dW, db), same order as the forward layers.
    pub d_layers: Vec<(Array2<f64>, Array1<f64>)>,
}

/// Backward pass for `gcn_forward`. `d_out` is the loss gradient wrt the
/// final node features.
pub fn gcn_backward(
    a_norm: &Array2<f64>,
    layers: &[GcnLayerParams],
    cache: &GcnCache,
    d_out: &Array2<f64>,
) -> GcnGrads {
    let l = layers.len();
    let mut d_layers: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(l);
    let mut d_cur = d_out.clone();
    for li in (0..l).rev() {
        let last = li == l - 1;
        let d_pre = if last && cache.final_linear {
            d_cur
        } else {
            let pre = &cache.pre_activations[li];
            let mut d = d_cur;
            d.zip_mut_with(pre, |g, &p| {
                if p <= 0.0 {
                    *g = 0.0;
                }
            });
            d
        };
        // pre = A' H W + b, with A' symmetric:
        //   dW = (A' H)^T dPre, db = column sums, dH = A' dPre W^T.
        let ah = a_norm.dot(&cache.inputs[li]);
        let dw = ah.t().dot(&d_pre);
        let db = d_pre.sum_axis(ndarray::Axis(0));
        d_cur = a_norm.dot(&d_pre).dot(&layers[li].w.t());
        d_layers.push((dw, db));
    }
    d_layers.reverse();
    GcnGrads { d_input: d_cur, d_layers }
}
