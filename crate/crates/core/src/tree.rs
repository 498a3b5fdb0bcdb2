//! Rooted trees with weighted edges and the sparse subtree matrix.
//!
//! Nodes are stored 0-based with the root at index 0. Internal (massless)
//! nodes occupy `0..n_internal`, support-carrying nodes ("leaves") occupy
//! `n_internal..n`, and every non-root node has a parent with a smaller
//! index. `weight[v]` is the length of the edge from `v` to its parent.
//!
//! A tree with `n_internal == 0` is a chain-style tree where every node
//! carries mass; such trees may have mass-carrying nodes with children.
//!
//! Error messages report node labels 1-based, as in the text format.

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    parent: Vec<Option<usize>>,
    weight: Vec<f64>,
    n_internal: usize,
    depth: usize,
}

/// Checks every structural invariant and returns the depth of the tree.
pub fn validate_tree(parent: &[Option<usize>], weight: &[f64], n_internal: usize) -> Result<usize> {
    let n = parent.len();
    if n == 0 {
        return Err(Error::Empty("tree has no nodes"));
    }
    check_len(n, weight.len())?;
    if n_internal >= n {
        return Err(Error::MalformedTree(format!(
            "{n_internal} internal nodes leave no leaves among {n} nodes"
        )));
    }
    if parent[0].is_some() {
        return Err(Error::MalformedTree("root has a parent".into()));
    }
    if weight[0] != 0.0 {
        return Err(Error::RootWeight);
    }
    for (v, &w) in weight.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidWeight { node: v + 1, weight: w });
        }
    }

    let mut children = vec![0usize; n];
    for v in 1..n {
        let p = parent[v]
            .ok_or_else(|| Error::MalformedTree(format!("node {} has no parent", v + 1)))?;
        if p >= n {
            return Err(Error::MalformedTree(format!(
                "node {} has out-of-range parent {}",
                v + 1,
                p + 1
            )));
        }
        if p >= v {
            // Distinguish a true cycle from a merely misordered edge.
            let mut cur = p;
            for _ in 0..n {
                if cur == v {
                    return Err(Error::Cycle(v + 1));
                }
                match parent[cur] {
                    Some(q) => cur = q,
                    None => break,
                }
            }
            return Err(Error::TopologicalOrder(v + 1));
        }
        children[p] += 1;
    }

    for v in 0..n {
        if v >= n_internal && n_internal > 0 && children[v] > 0 {
            return Err(Error::LeafWithChildren(v + 1));
        }
        if v < n_internal && v != 0 && children[v] == 0 {
            return Err(Error::ChildlessInternal(v + 1));
        }
    }

    let mut level = vec![0usize; n];
    let mut depth = 0;
    for v in 1..n {
        level[v] = level[parent[v].unwrap()] + 1;
        depth = depth.max(level[v]);
    }
    Ok(depth)
}

impl Tree {
    pub fn new(parent: Vec<Option<usize>>, weight: Vec<f64>, n_internal: usize) -> Result<Self> {
        let depth = validate_tree(&parent, &weight, n_internal)?;
        Ok(Self { parent, weight, n_internal, depth })
    }

    /// Chain tree where node `i + 1` hangs below node `i` and every node carries mass.
    pub fn chain(weight: Vec<f64>) -> Result<Self> {
        let parent = (0..weight.len()).map(|i| i.checked_sub(1)).collect();
        Self::new(parent, weight, 0)
    }

    pub fn validate(&self) -> Result<()> {
        validate_tree(&self.parent, &self.weight, self.n_internal).map(|_| ())
    }

    pub fn n_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn n_internal(&self) -> usize {
        self.n_internal
    }

    pub fn n_leaf(&self) -> usize {
        self.parent.len() - self.n_internal
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.weight[v]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    /// Node index of the `k`-th leaf.
    pub fn leaf_node(&self, k: usize) -> usize {
        self.n_internal + k
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v >= self.n_internal
    }

    pub fn child_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_nodes()];
        for p in self.parent.iter().flatten() {
            counts[*p] += 1;
        }
        counts
    }

    pub fn is_chain(&self) -> bool {
        self.n_internal == 0 && self.parent.iter().enumerate().skip(1).all(|(i, p)| *p == Some(i - 1))
    }
}

/// Removes every non-root internal node that has a single child, folding its
/// edge length into the child's edge. Leaf order is preserved.
pub fn compact_tree(t: &Tree) -> Tree {
    let n = t.n_nodes();
    let children = t.child_counts();
    let keep: Vec<bool> = (0..n).map(|v| v == 0 || t.is_leaf(v) || children[v] != 1).collect();

    let mut new_index = vec![usize::MAX; n];
    let mut next = 0;
    for v in 0..n {
        if keep[v] {
            new_index[v] = next;
            next += 1;
        }
    }

    let mut parent = Vec::with_capacity(next);
    let mut weight = Vec::with_capacity(next);
    let mut n_internal = 0;
    for v in 0..n {
        if !keep[v] {
            continue;
        }
        if !t.is_leaf(v) {
            n_internal += 1;
        }
        match t.parent[v] {
            None => {
                parent.push(None);
                weight.push(0.0);
            }
            Some(mut p) => {
                let mut w = t.weight[v];
                while !keep[p] {
                    w += t.weight[p];
                    p = t.parent[p].expect("removed nodes are never the root");
                }
                parent.push(Some(new_index[p]));
                weight.push(w);
            }
        }
    }
    Tree::new(parent, weight, n_internal).expect("compaction preserves validity")
}

/// Linear maps from leaf masses to weighted subtree masses.
///
/// Implemented by the generic sparse [`SubtreeMatrix`] and by the chain
/// kernels; the solvers only ever see this trait.
pub trait SubtreeOperator: Send + Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// `out = B a`. `out` must have length `n_rows`.
    fn apply_into(&self, a: &[f64], out: &mut [f64]);
    /// `out = Bᵀ z`. `out` must have length `n_cols`.
    fn apply_transpose_into(&self, z: &[f64], out: &mut [f64]);
}

/// Sparse `|V| x |V_leaf|` matrix whose entry `(v, l)` is `w_v` when leaf `l`
/// lies below `v` (inclusive), stored column-major with ascending rows.
/// Zero-weight nodes are dropped, so row 0 is always empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtreeMatrix {
    n_rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SubtreeMatrix {
    pub fn build(t: &Tree) -> Self {
        let n_cols = t.n_leaf();
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        let mut path = Vec::with_capacity(t.depth() + 1);
        for k in 0..n_cols {
            path.clear();
            let mut v = Some(t.leaf_node(k));
            while let Some(node) = v {
                if t.weight(node) != 0.0 {
                    path.push(node);
                }
                v = t.parent(node);
            }
            for &node in path.iter().rev() {
                row_idx.push(node);
                values.push(t.weight(node));
            }
            col_ptr.push(row_idx.len());
        }
        Self { n_rows: t.n_nodes(), col_ptr, row_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(row, value)` pairs of one leaf column.
    pub fn column(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[k]..self.col_ptr[k + 1];
        self.row_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn column_nnz(&self, k: usize) -> usize {
        self.col_ptr[k + 1] - self.col_ptr[k]
    }

    pub fn apply(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_cols(), a.len())?;
        let mut out = vec![0.0; self.n_rows];
        self.apply_into(a, &mut out);
        Ok(out)
    }

    pub fn apply_transpose(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_rows, z.len())?;
        let mut out = vec![0.0; self.n_cols()];
        self.apply_transpose_into(z, &mut out);
        Ok(out)
    }

    /// Dense row-major copy; meant for small instances and checks.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols()]; self.n_rows];
        for k in 0..self.n_cols() {
            for (r, w) in self.column(k) {
                dense[r][k] = w;
            }
        }
        dense
    }
}

impl SubtreeOperator for SubtreeMatrix {
    fn n_rows(&self) -> usize {
        self.n_rows
    }

    fn n_cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    fn apply_into(&self, a: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (k, &mass) in a.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for idx in self.col_ptr[k]..self.col_ptr[k + 1] {
                out[self.row_idx[idx]] += self.values[idx] * mass;
            }
        }
    }

    fn apply_transpose_into(&self, z: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for idx in self.col_ptr[k]..self.col_ptr[k + 1] {
                acc += self.values[idx] * z[self.row_idx[idx]];
            }
            *o = acc;
        }
    }
}
