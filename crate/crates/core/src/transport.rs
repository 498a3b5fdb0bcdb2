//! Closed-form tree-Wasserstein and tree-sliced-Wasserstein distances.
//!
//! Two independent evaluations are provided: a bottom-up pass over subtree
//! masses, and the L1 norm of the subtree-matrix product. Both accumulate
//! with compensated summation.

use rayon::prelude::*;

use crate::build::EmbeddedTree;
use crate::error::{check_len, Error, Result};
use crate::numeric::CompensatedSum;
use crate::tree::{SubtreeMatrix, SubtreeOperator, Tree};

pub fn tree_wasserstein_subtree(t: &Tree, a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(t.n_leaf(), a.len())?;
    check_len(t.n_leaf(), b.len())?;
    let mut mass = vec![0.0; t.n_nodes()];
    for k in 0..t.n_leaf() {
        mass[t.leaf_node(k)] = a[k] - b[k];
    }
    let mut acc = CompensatedSum::new();
    for v in (1..t.n_nodes()).rev() {
        acc.add(t.weight(v) * mass[v].abs());
        let p = t.parent(v).expect("non-root node");
        mass[p] += mass[v];
    }
    Ok(acc.value())
}

pub fn tree_wasserstein_matrix(m: &SubtreeMatrix, a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(m.n_cols(), a.len())?;
    check_len(m.n_cols(), b.len())?;
    let ba = m.apply(a)?;
    let bb = m.apply(b)?;
    Ok(ba.iter().zip(&bb).map(|(x, y)| (x - y).abs()).collect::<CompensatedSum>().value())
}

/// One ensemble member: the embedded tree plus its subtree matrix.
#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub embedded: EmbeddedTree,
    pub matrix: SubtreeMatrix,
}

impl EnsembleMember {
    /// Reorders a vector over the common support into this tree's leaf order.
    pub fn to_leaf_order(&self, x: &[f64]) -> Vec<f64> {
        self.embedded.leaf_points.iter().map(|&p| x[p]).collect()
    }
}

/// `T >= 1` trees sharing the support set `0..n_support`.
#[derive(Debug, Clone)]
pub struct TreeEnsemble {
    members: Vec<EnsembleMember>,
    n_support: usize,
}

impl TreeEnsemble {
    pub fn new(trees: Vec<EmbeddedTree>) -> Result<Self> {
        let n_support = trees.first().ok_or(Error::Empty("tree ensemble"))?.leaf_points.len();
        let members = trees
            .into_iter()
            .map(|embedded| {
                embedded.check_coverage(n_support)?;
                let matrix = SubtreeMatrix::build(&embedded.tree);
                Ok(EnsembleMember { embedded, matrix })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { members, n_support })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n_support(&self) -> usize {
        self.n_support
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }
}

/// Average of the per-tree distances; `a` and `b` are indexed by support.
pub fn tree_sliced_wasserstein(e: &TreeEnsemble, a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(e.n_support, a.len()).map_err(|_| support_mismatch(e.n_support, a.len()))?;
    check_len(e.n_support, b.len()).map_err(|_| support_mismatch(e.n_support, b.len()))?;
    let per_tree = e
        .members
        .par_iter()
        .map(|m| tree_wasserstein_matrix(&m.matrix, &m.to_leaf_order(a), &m.to_leaf_order(b)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_tree.iter().copied().collect::<CompensatedSum>().value() / e.len() as f64)
}

fn support_mismatch(expected: usize, got: usize) -> Error {
    Error::Support(format!("distribution over {got} supports, ensemble over {expected}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_node() -> Tree {
        Tree::new(vec![None, Some(0), Some(1), Some(1)], vec![0.0, 1.0, 1.0, 1.0], 2).unwrap()
    }

    #[test]
    fn hand_evaluated_distances() {
        let t = four_node();
        let m = SubtreeMatrix::build(&t);
        let cases = [([1.0, 0.0], [0.0, 1.0], 2.0), ([0.5, 0.5], [1.0, 0.0], 1.0), ([0.3, 0.7], [0.3, 0.7], 0.0)];
        for (a, b, want) in cases {
            assert_eq!(tree_wasserstein_subtree(&t, &a, &b).unwrap(), want);
            assert_eq!(tree_wasserstein_matrix(&m, &a, &b).unwrap(), want);
        }
    }

    #[test]
    fn mismatched_lengths() {
        let t = four_node();
        assert!(tree_wasserstein_subtree(&t, &[1.0], &[0.0, 1.0]).is_err());
        assert!(tree_wasserstein_matrix(&SubtreeMatrix::build(&t), &[1.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn sliced_average() {
        // Stars whose two leaves sit at distance w.
        let mk = |w: f64| {
            let tree = Tree::new(vec![None, Some(0), Some(0)], vec![0.0, w / 2.0, w / 2.0], 1).unwrap();
            EmbeddedTree::new(tree, vec![0, 1]).unwrap()
        };
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let single = TreeEnsemble::new(vec![mk(1.0)]).unwrap();
        assert_eq!(tree_sliced_wasserstein(&single, &a, &b).unwrap(), 1.0);
        let pair = TreeEnsemble::new(vec![mk(1.0), mk(3.0)]).unwrap();
        assert_eq!(tree_sliced_wasserstein(&pair, &a, &b).unwrap(), 2.0);
        assert_eq!(tree_sliced_wasserstein(&pair, &a, &a).unwrap(), 0.0);
        assert!(matches!(tree_sliced_wasserstein(&pair, &[1.0], &b), Err(Error::Support(_))));
    }

    #[test]
    fn ensemble_respects_leaf_permutation() {
        let tree = Tree::new(vec![None, Some(0), Some(1), Some(1), Some(0)], vec![0.0, 1.0, 1.0, 1.0, 1.0], 2)
            .unwrap();
        let straight = EmbeddedTree::new(tree.clone(), vec![0, 1, 2]).unwrap();
        let permuted = EmbeddedTree::new(tree, vec![2, 0, 1]).unwrap();
        let a = [1.0, 0.0, 0.0];
        let b = [0.0, 0.0, 1.0];
        let e1 = TreeEnsemble::new(vec![straight]).unwrap();
        let e2 = TreeEnsemble::new(vec![permuted]).unwrap();
        // supports 0 and 2 sit in different subtrees of one tree and are siblings in the other
        assert_eq!(tree_sliced_wasserstein(&e1, &a, &b).unwrap(), 3.0);
        assert_eq!(tree_sliced_wasserstein(&e2, &a, &b).unwrap(), 2.0);
    }
}
