//! Chain-shaped trees (every node carries mass) with linear-time subtree
//! products, and the fixed-support sliced-Wasserstein barycenter built on
//! them.

use crate::build::{sorted_projection, BuildConfig, EmbeddedTree, WeightScheme};
use crate::error::{check_len, Error, Result};
use crate::points::PointCloud;
use crate::solver::{fastpsd_solve, BarycenterProblem, Slice, SolveConfig, SolveResult};
use crate::tree::{SubtreeOperator, Tree};

/// Node `i + 1` hangs below node `i`; `weights[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    weights: Vec<f64>,
    leaf_points: Vec<usize>,
    positions: Option<Vec<f64>>,
}

impl Chain {
    pub fn new(weights: Vec<f64>, leaf_points: Vec<usize>) -> Result<Self> {
        // Reuse the tree validation for weights.
        Tree::chain(weights.clone())?;
        check_len(weights.len(), leaf_points.len())?;
        Ok(Self { weights, leaf_points, positions: None })
    }

    pub fn from_embedded(et: &EmbeddedTree) -> Result<Self> {
        if !et.tree.is_chain() {
            return Err(Error::MalformedTree("tree is not a chain".into()));
        }
        Self::new(et.tree.weights().to_vec(), et.leaf_points.clone())
    }

    /// Chain along a projection of the cloud, keeping projected coordinates.
    pub fn from_points(pc: &PointCloud, cfg: &BuildConfig) -> Result<Self> {
        let (order, values) = sorted_projection(pc, cfg)?;
        let weights = std::iter::once(0.0)
            .chain(values.windows(2).map(|w| match cfg.weight_scheme {
                WeightScheme::Unit => 1.0,
                WeightScheme::LevelHalving => w[1] - w[0],
            }))
            .collect();
        let mut chain = Self::new(weights, order)?;
        chain.positions = Some(values);
        Ok(chain)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn leaf_points(&self) -> &[usize] {
        &self.leaf_points
    }

    pub fn positions(&self) -> Option<&[f64]> {
        self.positions.as_deref()
    }

    pub fn to_tree(&self) -> Tree {
        Tree::chain(self.weights.clone()).expect("chain weights were validated")
    }

    pub fn to_embedded(&self) -> EmbeddedTree {
        EmbeddedTree { tree: self.to_tree(), leaf_points: self.leaf_points.clone() }
    }

    /// `b[i] = w_i * sum_{j >= i} a_j`, one reverse pass.
    pub fn apply_b(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), a.len())?;
        let mut out = vec![0.0; self.len()];
        self.apply_into(a, &mut out);
        Ok(out)
    }

    /// `g[j] = sum_{i <= j} w_i z_i`, one forward pass.
    pub fn apply_b_transpose(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), z.len())?;
        let mut out = vec![0.0; self.len()];
        self.apply_transpose_into(z, &mut out);
        Ok(out)
    }
}

impl SubtreeOperator for Chain {
    fn n_rows(&self) -> usize {
        self.weights.len()
    }

    fn n_cols(&self) -> usize {
        self.weights.len()
    }

    fn apply_into(&self, a: &[f64], out: &mut [f64]) {
        let mut suffix = 0.0;
        for i in (0..a.len()).rev() {
            suffix += a[i];
            out[i] = self.weights[i] * suffix;
        }
    }

    fn apply_transpose_into(&self, z: &[f64], out: &mut [f64]) {
        let mut prefix = 0.0;
        for i in 0..z.len() {
            prefix += self.weights[i] * z[i];
            out[i] = prefix;
        }
    }
}

/// Fixed-support sliced-Wasserstein barycenter: FastPSD over a set of chains.
pub fn swb_solve(chains: &[Chain], inputs: &[Vec<f64>], cfg: &SolveConfig) -> Result<SolveResult> {
    fastpsd_solve(&chain_problem(chains, inputs)?, cfg)
}

pub fn chain_problem<'a>(chains: &'a [Chain], inputs: &'a [Vec<f64>]) -> Result<BarycenterProblem<'a, Chain>> {
    let slices = chains.iter().map(|c| Slice { op: c, leaf_points: &c.leaf_points[..] }).collect();
    BarycenterProblem::new(slices, inputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(w: &[f64]) -> Chain {
        Chain::new(w.to_vec(), (0..w.len()).collect()).unwrap()
    }

    #[test]
    fn suffix_products() {
        let c = chain(&[0.0, 1.0, 1.0]);
        let b = c.apply_b(&[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(b[0], 0.0);
        assert!((b[1] - 0.8).abs() < 1e-15);
        assert_eq!(b[2], 0.5);
        assert_eq!(c.apply_b(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(chain(&[0.0, 0.5, 1.5]).apply_b(&[0.0, 0.0, 1.0]).unwrap(), vec![0.0, 0.5, 1.5]);
    }

    #[test]
    fn prefix_products() {
        let c = chain(&[0.0, 1.0, 1.0]);
        assert_eq!(c.apply_b_transpose(&[1.0, -1.0, 2.0]).unwrap(), vec![0.0, -1.0, 1.0]);
        assert_eq!(c.apply_b_transpose(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(c.apply_b_transpose(&[7.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn rejects_non_chains() {
        let t = Tree::new(vec![None, Some(0), Some(0)], vec![0.0, 1.0, 1.0], 1).unwrap();
        let et = EmbeddedTree::new(t, vec![0, 1]).unwrap();
        assert!(Chain::from_embedded(&et).is_err());
        assert!(Chain::new(vec![1.0, 1.0], vec![0, 1]).is_err());
        assert!(chain(&[0.0, 1.0]).apply_b(&[1.0]).is_err());
    }

    #[test]
    fn identical_inputs_start_optimal() {
        let c = chain(&[0.0, 1.0, 2.0]);
        let inputs = vec![vec![0.2, 0.3, 0.5]; 3];
        let r = swb_solve(&[c], &inputs, &SolveConfig { max_iters: 10, ..Default::default() }).unwrap();
        assert_eq!(r.f_best, 0.0);
    }
}
