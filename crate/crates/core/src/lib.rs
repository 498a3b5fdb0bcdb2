//! Optimal transport on tree metrics: tree embeddings of point clouds,
//! closed-form tree-(sliced-)Wasserstein distances, and fixed-support
//! barycenters by projected subgradient descent, with an entropic
//! Bregman-projection baseline.

pub mod build;
pub mod chain;
pub mod cli;
pub mod error;
pub mod ibp;
pub mod io;
mod numeric;
pub mod points;
pub mod simplex;
pub mod solver;
pub mod synth;
pub mod transport;
pub mod tree;

pub use build::{build_tree, sample_ensemble, BuildConfig, BuildMethod, EmbeddedTree, WeightScheme};
pub use chain::{swb_solve, Chain};
pub use error::{Error, Result};
pub use ibp::{build_cost_matrix, evaluate_loss, ibp_barycenter, CostMatrix, IbpConfig, IbpResult};
pub use numeric::compensated_sum;
pub use points::PointCloud;
pub use simplex::project_simplex;
pub use solver::{
    fastpsd_solve, psd_solve, solve, Algorithm, BarycenterProblem, Init, SolveConfig, SolveResult, SortedColumnIndex,
};
pub use transport::{tree_sliced_wasserstein, tree_wasserstein_matrix, tree_wasserstein_subtree, TreeEnsemble};
pub use tree::{compact_tree, SubtreeMatrix, SubtreeOperator, Tree};
