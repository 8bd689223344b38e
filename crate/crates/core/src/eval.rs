//! Imbalance-aware evaluation: confusion matrices, per-class P/R/F1 with
//! macro averaging, Matthews correlation (binary and multiclass), stratified
//! k-fold splitting, and fold-aggregated reports.
//!
//! Counts accumulate in integers; floating-point arithmetic happens only at
//! the final ratios.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TypedSpan;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold has {0} labels but predictions have {1}")]
    LengthMismatch(usize, usize),
    #[error("label {0} outside the {1}-class space")]
    UnknownLabel(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("class {class:?} has only {count} members for {k} folds")]
    ClassTooSmall { class: String, count: usize, k: usize },
}

/// K x K confusion counts; `counts[i][j]` is gold class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let k = classes.len();
        ConfusionMatrix { classes, counts: vec![vec![0; k]; k] }
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    /// Row sum: how often class `i` truly occurred.
    pub fn gold_count(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    /// Column sum: how often class `i` was predicted.
    pub fn pred_count(&self, i: usize) -> u64 {
        self.counts.iter().map(|row| row[i]).sum()
    }

    pub fn add(&mut self, gold: usize, pred: usize) {
        self.counts[gold][pred] += 1;
    }

    /// Merges another matrix over the same class set.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes, other.classes, "fold matrices must share classes");
        for i in 0..self.k() {
            for j in 0..self.k() {
                self.counts[i][j] += other.counts[i][j];
            }
        }
    }
}

/// Builds a confusion matrix from parallel gold/pred label indices.
pub fn confusion(gold: &[usize], pred: &[usize], k: usize) -> Result<ConfusionMatrix, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch(gold.len(), pred.len()));
    }
    let classes = (0..k).map(|i| i.to_string()).collect();
    let mut cm = ConfusionMatrix::new(classes);
    for (&g, &p) in gold.iter().zip(pred) {
        if g >= k {
            return Err(EvalError::UnknownLabel(g, k));
        }
        if p >= k {
            return Err(EvalError::UnknownLabel(p, k));
        }
        cm.add(g, p);
    }
    Ok(cm)
}

/// Per-class precision/recall/F1 with support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfRow {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class rows in class order, with the zero-division convention P=R=F1=0.
pub fn per_class_prf(cm: &ConfusionMatrix) -> Vec<PrfRow> {
    (0..cm.k())
        .map(|i| {
            let tp = cm.counts[i][i];
            let precision = ratio(tp, cm.pred_count(i));
            let recall = ratio(tp, cm.gold_count(i));
            PrfRow {
                class: cm.classes[i].clone(),
                precision,
                recall,
                f1: f1_of(precision, recall),
                support: cm.gold_count(i),
            }
        })
        .collect()
}

/// Unweighted mean of per-class F1 over classes that occur in gold or
/// predictions; entirely absent classes do not dilute the average.
pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    let rows = per_class_prf(cm);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, row) in rows.iter().enumerate() {
        if row.support > 0 || cm.pred_count(i) > 0 {
            sum += row.f1;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Cross-fold average of per-fold F1 scores.
pub fn f1_avg(per_fold_f1: &[f64]) -> Result<f64, EvalError> {
    if per_fold_f1.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(per_fold_f1.iter().sum::<f64>() / per_fold_f1.len() as f64)
}

/// Binary MCC from TP/FP/TN/FN counts; any zero denominator factor gives 0.
pub fn mcc_from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> f64 {
    let num = (tp as i128) * (tn as i128) - (fp as i128) * (fn_ as i128);
    let f1 = (tp + fp) as i128;
    let f2 = (tp + fn_) as i128;
    let f3 = (tn + fp) as i128;
    let f4 = (tn + fn_) as i128;
    let den = f1 * f2 * f3 * f4;
    if den == 0 {
        return 0.0;
    }
    num as f64 / (den as f64).sqrt()
}

/// Binary MCC over a 2x2 confusion matrix. Class index 1 is positive:
/// TP = counts[1][1], TN = counts[0][0].
pub fn mcc_binary(cm: &ConfusionMatrix) -> f64 {
    assert_eq!(cm.k(), 2, "mcc_binary needs a 2x2 matrix");
    let tp = cm.counts[1][1];
    let tn = cm.counts[0][0];
    let fp = cm.counts[0][1];
    let fn_ = cm.counts[1][0];
    mcc_from_counts(tp, fp, tn, fn_)
}

/// Multiclass MCC:
/// `(c*s - sum p_k t_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2))`
/// with `t_k` gold counts, `p_k` predicted counts, `c` correct, `s` total.
/// Zero denominator gives 0. For K=2 this agrees with `mcc_binary`.
pub fn mcc_multiclass(cm: &ConfusionMatrix) -> f64 {
    let k = cm.k();
    let s = cm.total() as i128;
    let c = cm.correct() as i128;
    let mut sum_pt = 0i128;
    let mut sum_p2 = 0i128;
    let mut sum_t2 = 0i128;
    for i in 0..k {
        let p = cm.pred_count(i) as i128;
        let t = cm.gold_count(i) as i128;
        sum_pt += p * t;
        sum_p2 += p * p;
        sum_t2 += t * t;
    }
    let num = c * s - sum_pt;
    let den = (s * s - sum_p2) * (s * s - sum_t2);
    if den <= 0 {
        return 0.0;
    }
    num as f64 / (den as f64).sqrt()
}

/// MCC dispatched on matrix size: the binary formula for K=2, the
/// multiclass formula otherwise.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    if cm.k() == 2 {
        mcc_binary(cm)
    } else {
        mcc_multiclass(cm)
    }
}

/// Disjoint, exhaustive folds preserving per-class proportions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub folds: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// (train, test) index sets for one fold as test.
    pub fn split(&self, test_fold: usize) -> (Vec<usize>, Vec<usize>) {
        let test = self.folds[test_fold].clone();
        let mut train = Vec::new();
        for (i, fold) in self.folds.iter().enumerate() {
            if i != test_fold {
                train.extend_from_slice(fold);
            }
        }
        (train, test)
    }
}

/// Stratified k-fold split: per class, members shuffle under the seed and
/// deal round-robin starting at the least-filled fold, so per-fold class
/// counts differ from perfect proportion by at most one instance.
pub fn stratified_kfold(labels: &[String], k: usize, seed: u64) -> Result<FoldSplit, EvalError> {
    if labels.is_empty() || k == 0 {
        return Err(EvalError::EmptyInput);
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        by_class.entry(label.as_str()).or_default().push(i);
    }
    for (class, members) in &by_class {
        if members.len() < k {
            return Err(EvalError::ClassTooSmall {
                class: class.to_string(),
                count: members.len(),
                k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (_, mut members) in by_class {
        members.shuffle(&mut rng);
        // Start dealing at the currently least-filled fold (stable by index).
        let start = (0..k).min_by_key(|&f| (folds[f].len(), f)).unwrap();
        for (j, idx) in members.into_iter().enumerate() {
            folds[(start + j) % k].push(idx);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldSplit { folds })
}

/// Plain (unstratified) k-fold over `n` instances: seeded shuffle, then
/// round-robin dealing.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldSplit, EvalError> {
    if n == 0 || k == 0 || n < k {
        return Err(EvalError::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (j, idx) in indices.into_iter().enumerate() {
        folds[j % k].push(idx);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldSplit { folds })
}

/// Metrics for a single fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
}

/// Aggregated evaluation artifact for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub classes: Vec<String>,
    pub per_class: Vec<PrfRow>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub mcc: f64,
    pub per_fold: Vec<FoldMetrics>,
    /// Cross-fold mean of per-fold macro-F1.
    pub f1_avg: f64,
    pub confusion: ConfusionMatrix,
}

/// Builds the aggregate report from per-fold confusion matrices over a
/// shared class set. Pooled per-class numbers come from the merged matrix;
/// `f1_avg` averages the per-fold macro-F1 values.
pub fn build_report(
    task: &str,
    per_fold_cms: &[ConfusionMatrix],
) -> Result<MetricsReport, EvalError> {
    if per_fold_cms.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut pooled = ConfusionMatrix::new(per_fold_cms[0].classes.clone());
    let mut per_fold = Vec::new();
    let mut fold_f1s = Vec::new();
    for (i, cm) in per_fold_cms.iter().enumerate() {
        pooled.merge(cm);
        let rows = per_class_prf(cm);
        let (mp, mr) = macro_pr(cm, &rows);
        let mf1 = macro_f1(cm);
        per_fold.push(FoldMetrics {
            fold: i,
            precision: mp,
            recall: mr,
            f1: mf1,
            mcc: mcc(cm),
        });
        fold_f1s.push(mf1);
    }
    let per_class = per_class_prf(&pooled);
    let (macro_precision, macro_recall) = macro_pr(&pooled, &per_class);
    Ok(MetricsReport {
        task: task.to_string(),
        classes: pooled.classes.clone(),
        per_class,
        macro_precision,
        macro_recall,
        macro_f1: macro_f1(&pooled),
        mcc: mcc(&pooled),
        per_fold,
        f1_avg: f1_avg(&fold_f1s)?,
        confusion: pooled,
    })
}

/// Report for span-detection tasks: per-class and macro numbers come from
/// exact-match span counting, the confusion matrix and MCC from token-level
/// tags.
pub fn build_span_report(
    task: &str,
    per_fold: &[(SpanCounts, ConfusionMatrix)],
) -> Result<MetricsReport, EvalError> {
    if per_fold.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut pooled_spans = SpanCounts::default();
    let mut pooled_cm = ConfusionMatrix::new(per_fold[0].1.classes.clone());
    let mut fold_metrics = Vec::new();
    let mut fold_f1s = Vec::new();
    for (i, (counts, cm)) in per_fold.iter().enumerate() {
        pooled_cm.merge(cm);
        for (map_src, map_dst) in [
            (&counts.tp, &mut pooled_spans.tp),
            (&counts.fp, &mut pooled_spans.fp),
            (&counts.fn_, &mut pooled_spans.fn_),
        ] {
            for (label, n) in map_src {
                *map_dst.entry(label.clone()).or_insert(0) += n;
            }
        }
        let (_, p, r, f1) = counts.prf();
        fold_metrics.push(FoldMetrics { fold: i, precision: p, recall: r, f1, mcc: mcc(cm) });
        fold_f1s.push(f1);
    }
    let (per_class, macro_precision, macro_recall, macro_f1) = pooled_spans.prf();
    Ok(MetricsReport {
        task: task.to_string(),
        classes: per_class.iter().map(|r| r.class.clone()).collect(),
        per_class,
        macro_precision,
        macro_recall,
        macro_f1,
        mcc: mcc(&pooled_cm),
        per_fold: fold_metrics,
        f1_avg: f1_avg(&fold_f1s)?,
        confusion: pooled_cm,
    })
}

fn macro_pr(cm: &ConfusionMatrix, rows: &[PrfRow]) -> (f64, f64) {
    let mut p = 0.0;
    let mut r = 0.0;
    let mut n = 0usize;
    for (i, row) in rows.iter().enumerate() {
        if row.support > 0 || cm.pred_count(i) > 0 {
            p += row.precision;
            r += row.recall;
            n += 1;
        }
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (p / n as f64, r / n as f64)
    }
}

impl MetricsReport {
    /// Plain-text summary: one row per class plus the macro line.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("== {} ==\n", self.task));
        out.push_str(&format!(
            "{:<28} {:>9} {:>9} {:>9} {:>9}\n",
            "class", "P", "R", "F1", "support"
        ));
        for row in &self.per_class {
            if row.support == 0 && row.precision == 0.0 && row.recall == 0.0 {
                continue;
            }
            out.push_str(&format!(
                "{:<28} {:>9.3} {:>9.3} {:>9.3} {:>9}\n",
                row.class, row.precision, row.recall, row.f1, row.support
            ));
        }
        out.push_str(&format!(
            "{:<28} {:>9.3} {:>9.3} {:>9.3}   MCC {:.3}   F1-avg {:.3}\n",
            "macro", self.macro_precision, self.macro_recall, self.macro_f1, self.mcc, self.f1_avg
        ));
        out
    }
}

/// Exact-match span counting for the detection tasks: a predicted span is
/// correct when start, end, and label all match a gold span.
#[derive(Default)]
pub struct SpanCounts {
    pub tp: BTreeMap<String, u64>,
    pub fp: BTreeMap<String, u64>,
    pub fn_: BTreeMap<String, u64>,
}


impl SpanCounts {
    pub fn add_sentence(&mut self, gold: &[TypedSpan], pred: &[TypedSpan]) {
        let gold_set: std::collections::BTreeSet<&TypedSpan> = gold.iter().collect();
        let pred_set: std::collections::BTreeSet<&TypedSpan> = pred.iter().collect();
        for span in &pred_set {
            let slot = if gold_set.contains(*span) { &mut self.tp } else { &mut self.fp };
            *slot.entry(span.label.clone()).or_insert(0) += 1;
        }
        for span in &gold_set {
            if !pred_set.contains(*span) {
                *self.fn_.entry(span.label.clone()).or_insert(0) += 1;
            }
        }
    }

    /// Per-class rows plus (macro-P, macro-R, macro-F1) over observed labels.
    pub fn prf(&self) -> (Vec<PrfRow>, f64, f64, f64) {
        let mut labels: Vec<&String> =
            self.tp.keys().chain(self.fp.keys()).chain(self.fn_.keys()).collect();
        labels.sort();
        labels.dedup();
        let mut rows = Vec::new();
        let (mut sum_p, mut sum_r, mut sum_f) = (0.0, 0.0, 0.0);
        for label in &labels {
            let tp = *self.tp.get(*label).unwrap_or(&0);
            let fp = *self.fp.get(*label).unwrap_or(&0);
            let fn_ = *self.fn_.get(*label).unwrap_or(&0);
            let p = ratio(tp, tp + fp);
            let r = ratio(tp, tp + fn_);
            let f = f1_of(p, r);
            sum_p += p;
            sum_r += r;
            sum_f += f;
            rows.push(PrfRow {
                class: (*label).clone(),
                precision: p,
                recall: r,
                f1: f,
                support: tp + fn_,
            });
        }
        let n = labels.len().max(1) as f64;
        (rows, sum_p / n, sum_r / n, sum_f / n)
    }
}
