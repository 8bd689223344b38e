//! Independent oracles for the acceptance suite. Everything here recomputes
//! expected values through a different route than the library code under
//! test: BFS over an explicit adjacency list for tree pruning, one-hot
//! covariance for MCC, central finite differences for gradients.

use ndarray::{Array1, Array2};
use petrel_core::eval::ConfusionMatrix;
use petrel_core::graph::DepTree;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random labeled tree over `n` nodes: node ordering is a random
/// permutation and each non-root attaches to a randomly chosen earlier node.
pub fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> DepTree {
    assert!(n >= 1);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let mut heads = vec![None; n];
    for i in 1..n {
        let parent_pos = rng.random_range(0..i);
        heads[perm[i]] = Some(perm[parent_pos]);
    }
    DepTree::new(heads, vec!["dep".to_string(); n]).expect("construction is acyclic")
}

/// Undirected adjacency list built directly from head pointers.
pub fn adjacency(tree: &DepTree) -> Vec<Vec<usize>> {
    let n = tree.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        if let Some(h) = tree.head(i) {
            adj[i].push(h);
            adj[h].push(i);
        }
    }
    adj
}

/// BFS shortest path between two nodes, inclusive of both endpoints.
pub fn bfs_path(adj: &[Vec<usize>], a: usize, b: usize) -> Vec<usize> {
    let n = adj.len();
    let mut prev = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(a);
    seen[a] = true;
    while let Some(x) = queue.pop_front() {
        if x == b {
            break;
        }
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                prev[y] = x;
                queue.push_back(y);
            }
        }
    }
    let mut path = vec![b];
    let mut cur = b;
    while cur != a {
        cur = prev[cur];
        path.push(cur);
    }
    path.sort_unstable();
    path
}

/// Hop distances from every node via BFS, one source at a time.
pub fn bfs_distances(adj: &[Vec<usize>], source: usize) -> Vec<usize> {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    dist
}

/// Union of k-balls around a node set, by brute-force distance check.
pub fn ball_union(adj: &[Vec<usize>], seed_nodes: &[usize], k: usize) -> Vec<usize> {
    let n = adj.len();
    let mut kept = vec![false; n];
    for &s in seed_nodes {
        let dist = bfs_distances(adj, s);
        for (node, &d) in dist.iter().enumerate() {
            if d <= k {
                kept[node] = true;
            }
        }
    }
    (0..n).filter(|&i| kept[i]).collect()
}

/// Random confusion matrix with `k` classes and cell counts below `max_cell`.
pub fn random_confusion(k: usize, max_cell: u64, rng: &mut ChaCha8Rng) -> ConfusionMatrix {
    let classes = (0..k).map(|i| format!("c{i}")).collect();
    let mut cm = ConfusionMatrix::new(classes);
    for i in 0..k {
        for j in 0..k {
            cm.counts[i][j] = rng.random_range(0..max_cell);
        }
    }
    // guarantee at least one sample
    cm.counts[0][0] += 1;
    cm
}

/// Brute-force multiclass MCC via one-hot covariance: materializes every
/// sample, builds one-hot gold/pred encodings, and computes
/// `sum_k cov(x_k, y_k) / sqrt(sum_k var(x_k) * sum_k var(y_k))`.
pub fn mcc_one_hot_oracle(cm: &ConfusionMatrix) -> f64 {
    let k = cm.k();
    let mut gold: Vec<usize> = Vec::new();
    let mut pred: Vec<usize> = Vec::new();
    for i in 0..k {
        for j in 0..k {
            for _ in 0..cm.counts[i][j] {
                gold.push(i);
                pred.push(j);
            }
        }
    }
    let n = gold.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mut cov_xy = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for class in 0..k {
        let mean_x = gold.iter().filter(|&&g| g == class).count() as f64 / n;
        let mean_y = pred.iter().filter(|&&p| p == class).count() as f64 / n;
        let mut cxy = 0.0;
        let mut cxx = 0.0;
        let mut cyy = 0.0;
        for s in 0..gold.len() {
            let x = if gold[s] == class { 1.0 } else { 0.0 } - mean_x;
            let y = if pred[s] == class { 1.0 } else { 0.0 } - mean_y;
            cxy += x * y;
            cxx += x * x;
            cyy += y * y;
        }
        cov_xy += cxy;
        var_x += cxx;
        var_y += cyy;
    }
    let den = (var_x * var_y).sqrt();
    if den == 0.0 {
        0.0
    } else {
        cov_xy / den
    }
}

/// Direct scalar evaluation of the binary MCC formula.
pub fn mcc_binary_scalar(tp: f64, fp: f64, tn: f64, fn_: f64) -> f64 {
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den
    }
}

/// Global relative error between analytic and numeric gradients.
pub fn grad_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut diff = 0.0;
    let mut scale = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        diff += (a - n) * (a - n);
        scale += a * a + n * n;
    }
    (diff.sqrt()) / scale.sqrt().max(1e-12)
}

pub fn rand_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

pub fn rand_vector(len: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| rng.random_range(-1.0..1.0))
}
