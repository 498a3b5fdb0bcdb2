#![allow(dead_code)]

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treebary::{EmbeddedTree, Tree};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random rooted tree on `n >= 2` nodes in canonical order (internal nodes
/// first, parents before children). Weights are drawn from `(0.1, 2)`;
/// with `zero_prob` a non-root edge gets weight zero instead.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize, zero_prob: f64) -> Tree {
    assert!(n >= 2);
    let raw_parent: Vec<usize> = (0..n).map(|v| if v == 0 { 0 } else { rng.random_range(0..v) }).collect();
    let mut children = vec![Vec::new(); n];
    for v in 1..n {
        children[raw_parent[v]].push(v);
    }
    let mut bfs = vec![0];
    let mut head = 0;
    while head < bfs.len() {
        let v = bfs[head];
        head += 1;
        bfs.extend_from_slice(&children[v]);
    }
    let (internal, leaves): (Vec<usize>, Vec<usize>) = bfs.into_iter().partition(|&v| !children[v].is_empty());
    let order: Vec<usize> = internal.iter().chain(&leaves).copied().collect();
    let mut index = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        index[v] = i;
    }
    let parent = order.iter().map(|&v| if v == 0 { None } else { Some(index[raw_parent[v]]) }).collect();
    let weight = order
        .iter()
        .map(|&v| {
            if v == 0 {
                0.0
            } else if rng.random_bool(zero_prob) {
                0.0
            } else {
                rng.random_range(0.1..2.0)
            }
        })
        .collect();
    Tree::new(parent, weight, internal.len()).unwrap()
}

/// Random tree whose depth does not exceed `max_depth`.
pub fn random_shallow_tree(rng: &mut ChaCha8Rng, n_leaf: usize, max_depth: usize) -> Tree {
    assert!(max_depth >= 1 && n_leaf >= 1);
    // Grow internal levels, then hang leaves on random internal nodes of
    // the deepest levels; childless internal nodes are pruned at the end.
    let mut parent: Vec<usize> = vec![0];
    let mut level = vec![0usize];
    let n_int = (n_leaf / 3).max(1);
    while parent.len() < n_int {
        let candidates: Vec<usize> = (0..parent.len()).filter(|&v| level[v] + 1 < max_depth).collect();
        if candidates.is_empty() {
            break;
        }
        let p = *candidates.choose(rng).unwrap();
        parent.push(p);
        level.push(level[p] + 1);
    }
    let n_internal_raw = parent.len();
    let leaf_parent: Vec<usize> = (0..n_leaf).map(|_| rng.random_range(0..n_internal_raw)).collect();
    // Pruning childless internal nodes may expose new childless ones.
    let mut alive = vec![true; n_internal_raw];
    loop {
        let mut changed = false;
        let mut kids = vec![0usize; n_internal_raw];
        for v in 1..n_internal_raw {
            if alive[v] {
                kids[parent[v]] += 1;
            }
        }
        for &p in &leaf_parent {
            kids[p] += 1;
        }
        for v in 1..n_internal_raw {
            if alive[v] && kids[v] == 0 {
                alive[v] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let internal: Vec<usize> = (0..n_internal_raw).filter(|&v| alive[v]).collect();
    let mut index = vec![usize::MAX; n_internal_raw];
    for (i, &v) in internal.iter().enumerate() {
        index[v] = i;
    }
    let mut par = vec![None];
    let mut w = vec![0.0];
    for &v in &internal[1..] {
        par.push(Some(index[parent[v]]));
        w.push(rng.random_range(0.1..2.0));
    }
    for &p in &leaf_parent {
        par.push(Some(index[p]));
        w.push(rng.random_range(0.1..2.0));
    }
    Tree::new(par, w, internal.len()).unwrap()
}

pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    // Some exact zeros, as real histograms have.
    for v in x.iter_mut() {
        if rng.random_bool(0.2) {
            *v = 0.0;
        }
    }
    if x.iter().all(|&v| v == 0.0) {
        x[0] = 1.0;
    }
    let s: f64 = x.iter().sum();
    x.iter().map(|v| v / s).collect()
}

pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn embed(tree: Tree, rng: &mut ChaCha8Rng) -> EmbeddedTree {
    let n = tree.n_leaf();
    EmbeddedTree::new(tree, random_permutation(rng, n)).unwrap()
}

/// Dense subtree matrix built by walking every leaf's root path.
pub fn dense_subtree_oracle(t: &Tree) -> Vec<Vec<f64>> {
    let mut b = vec![vec![0.0; t.n_leaf()]; t.n_nodes()];
    for k in 0..t.n_leaf() {
        let mut v = Some(t.leaf_node(k));
        while let Some(node) = v {
            b[node][k] = t.weight(node);
            v = t.parent(node);
        }
    }
    b
}

pub fn dense_apply(b: &[Vec<f64>], a: &[f64]) -> Vec<f64> {
    b.iter().map(|row| row.iter().zip(a).map(|(x, y)| x * y).sum()).collect()
}

/// Shortest-path distance between two nodes.
pub fn path_distance(t: &Tree, mut u: usize, mut v: usize) -> f64 {
    let mut d = 0.0;
    let depth = |mut x: usize| {
        let mut k = 0;
        while let Some(p) = t.parent(x) {
            x = p;
            k += 1;
        }
        k
    };
    let (mut du, mut dv) = (depth(u), depth(v));
    while du > dv {
        d += t.weight(u);
        u = t.parent(u).unwrap();
        du -= 1;
    }
    while dv > du {
        d += t.weight(v);
        v = t.parent(v).unwrap();
        dv -= 1;
    }
    while u != v {
        d += t.weight(u) + t.weight(v);
        u = t.parent(u).unwrap();
        v = t.parent(v).unwrap();
    }
    d
}

/// `sum_i sign(q - v_i)` with `sign(0) = +1`.
pub fn brute_sign_sum(values: &[f64], q: f64) -> i64 {
    values.iter().map(|&v| if q - v >= 0.0 { 1 } else { -1 }).sum()
}

pub fn brute_abs_sum(values: &[f64], q: f64) -> f64 {
    values.iter().map(|&v| (q - v).abs()).sum()
}

/// Exact 1-D W1 between weighted point sets on a line, via the CDF formula.
pub fn w1_cdf(positions: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..positions.len()).collect();
    idx.sort_by(|&i, &j| positions[i].total_cmp(&positions[j]));
    let mut cdf = 0.0;
    let mut total = 0.0;
    for w in idx.windows(2) {
        cdf += a[w[0]] - b[w[0]];
        total += cdf.abs() * (positions[w[1]] - positions[w[0]]);
    }
    total
}

pub fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Random points spread over a plane with no exact coordinate ties.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> treebary::PointCloud {
    let rows = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    treebary::PointCloud::with_index_ids(rows).unwrap()
}

/// Nearest simplex point to `x` (length 2 or 3) by successively refined
/// grid searches; the objective is convex, so zooming in is safe.
pub fn simplex_grid_argmin(x: &[f64]) -> Vec<f64> {
    let dist = |a: &[f64]| a.iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    let n = x.len();
    assert!(n == 2 || n == 3);
    let mut center = vec![1.0 / n as f64; n];
    let mut h: f64 = 0.01;
    let mut radius: f64 = 1.0;
    while h > 1e-7 {
        let steps = (radius / h).ceil() as i64;
        let mut best = (f64::INFINITY, center.clone());
        for i in -steps..=steps {
            let a0 = center[0] + i as f64 * h;
            let range = if n == 3 { -steps..=steps } else { 0..=0 };
            for j in range {
                let a = if n == 2 {
                    vec![a0, 1.0 - a0]
                } else {
                    let a1 = center[1] + j as f64 * h;
                    vec![a0, a1, 1.0 - a0 - a1]
                };
                if a.iter().any(|&v| v < 0.0) {
                    continue;
                }
                let d = dist(&a);
                if d < best.0 {
                    best = (d, a);
                }
            }
        }
        center = best.1;
        radius = 2.0 * h;
        h /= 10.0;
    }
    center
}
