//! Minimal neural building blocks: dense layers, softmax cross-entropy,
//! self-attentive pooling, and Adam. Everything is f64 and carries an
//! explicit backward pass so gradients stay checkable against finite
//! differences.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Dense layer `y = x W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    /// Xavier-uniform initialization.
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Linear {
            w: Array2::from_shape_fn((in_dim, out_dim), |_| rng.random_range(-bound..bound)),
            b: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.w);
        y += &self.b;
        y
    }

    /// Returns (dX, dW, db) for upstream gradient `dy`.
    pub fn backward(
        &self,
        x: &Array2<f64>,
        dy: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        let dx = dy.dot(&self.w.t());
        let dw = x.t().dot(dy);
        let db = dy.sum_axis(Axis(0));
        (dx, dw, db)
    }
}

pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Masks `grad` where the pre-activation was non-positive.
pub fn relu_backward(pre: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
    let mut out = grad.clone();
    out.zip_mut_with(pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

pub fn tanh(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(f64::tanh)
}

/// Backward through tanh given the activation output `act = tanh(pre)`.
pub fn tanh_backward(act: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
    let mut out = grad.clone();
    out.zip_mut_with(act, |g, &a| *g *= 1.0 - a * a);
    out
}

/// Row-wise softmax, numerically stabilized.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

pub fn softmax_vec(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.mapv(|v| (v - max).exp());
    let sum = out.sum();
    out.mapv_inplace(|v| v / sum);
    out
}

/// Mean cross-entropy over rows plus the gradient wrt the logits.
/// `class_weights`, when present, scales each row's loss by its target
/// class weight (used to down-weight the NONE role).
pub fn cross_entropy(
    logits: &Array2<f64>,
    targets: &[usize],
    class_weights: Option<&[f64]>,
) -> (f64, Array2<f64>) {
    let n = targets.len();
    assert_eq!(logits.nrows(), n, "one logit row per target");
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    let mut dlogits = probs.clone();
    for (i, &t) in targets.iter().enumerate() {
        let w = class_weights.map_or(1.0, |cw| cw[t]);
        loss += -probs[[i, t]].max(1e-300).ln() * w;
        for j in 0..logits.ncols() {
            let indicator = if j == t { 1.0 } else { 0.0 };
            dlogits[[i, j]] = (probs[[i, j]] - indicator) * w / n as f64;
        }
    }
    (loss / n as f64, dlogits)
}

/// Argmax with lowest-index tie-break, so predictions are deterministic.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Cache for the attentive-pooling backward pass.
pub struct AttentiveCache {
    span: Vec<usize>,
    alpha: Array1<f64>,
}

/// Self-attentive span pooling: weights `alpha = softmax(w . h_t)` over the
/// span tokens, output `sum_t alpha_t h_t`.
pub fn attentive_pool(
    feats: &Array2<f64>,
    span: &[usize],
    w: &Array1<f64>,
) -> (Array1<f64>, AttentiveCache) {
    assert!(!span.is_empty(), "attentive pooling needs a non-empty span");
    let scores = Array1::from_iter(span.iter().map(|&t| feats.row(t).dot(w)));
    let alpha = softmax_vec(&scores);
    let mut out = Array1::<f64>::zeros(feats.ncols());
    for (idx, &t) in span.iter().enumerate() {
        out.scaled_add(alpha[idx], &feats.row(t));
    }
    (out, AttentiveCache { span: span.to_vec(), alpha })
}

/// Backward pass for `attentive_pool`: gradients wrt the span rows of the
/// feature matrix (accumulated into `d_feats`) and wrt the scoring vector.
pub fn attentive_pool_backward(
    feats: &Array2<f64>,
    w: &Array1<f64>,
    cache: &AttentiveCache,
    d_out: &Array1<f64>,
    d_feats: &mut Array2<f64>,
) -> Array1<f64> {
    let alpha = &cache.alpha;
    // dL/dalpha_t = d_out . h_t
    let d_alpha =
        Array1::from_iter(cache.span.iter().map(|&t| feats.row(t).dot(d_out)));
    // Softmax Jacobian: ds_t = alpha_t (d_alpha_t - sum_u alpha_u d_alpha_u)
    let dot = alpha.dot(&d_alpha);
    let d_scores = Array1::from_shape_fn(alpha.len(), |t| alpha[t] * (d_alpha[t] - dot));
    let mut d_w = Array1::<f64>::zeros(w.len());
    for (idx, &t) in cache.span.iter().enumerate() {
        d_w.scaled_add(d_scores[idx], &feats.row(t));
        // dL/dh_t = alpha_t d_out + d_scores_t w
        let mut row = d_feats.row_mut(t);
        row.scaled_add(alpha[idx], d_out);
        row.scaled_add(d_scores[idx], w);
    }
    d_w
}

/// Adam state for one parameter tensor (flattened).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn step<'a>(
        &mut self,
        params: impl Iterator<Item = &'a mut f64>,
        grads: impl Iterator<Item = &'a f64>,
        lr: f64,
    ) {
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        for (i, (p, g)) in params.zip(grads).enumerate() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + EPS);
        }
    }
}
