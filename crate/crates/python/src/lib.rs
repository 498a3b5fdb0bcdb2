use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use treebary::build::{sample_ensemble, BuildConfig, BuildMethod, EmbeddedTree, WeightScheme};
use treebary::chain::{swb_solve, Chain};
use treebary::ibp::{build_cost_matrix, evaluate_loss as loss, ibp_barycenter, IbpConfig};
use treebary::solver::{solve, Algorithm, BarycenterProblem, Init, SolveConfig, SolveResult};
use treebary::synth::{generate_synthetic as synth, SynthConfig, SynthKind};
use treebary::transport::{tree_sliced_wasserstein as tsw, tree_wasserstein_subtree, TreeEnsemble};
use treebary::tree::SubtreeMatrix;

fn err(e: treebary::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn bad(msg: String) -> PyErr {
    PyValueError::new_err(msg)
}

#[pyclass(name = "PointCloud", module = "pytreebary", frozen)]
struct PyPointCloud {
    inner: treebary::PointCloud,
}

#[pymethods]
impl PyPointCloud {
    #[new]
    #[pyo3(signature = (rows, ids=None))]
    fn new(rows: Vec<Vec<f64>>, ids: Option<Vec<String>>) -> PyResult<Self> {
        let inner = match ids {
            Some(ids) => treebary::PointCloud::new(rows, ids),
            None => treebary::PointCloud::with_index_ids(rows),
        }
        .map_err(err)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids().to_vec()
    }

    fn point(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.len() {
            return Err(bad(format!("point index {i} out of range")));
        }
        Ok(self.inner.point(i).to_vec())
    }
}

/// A weighted rooted tree whose leaves map onto support points.
#[pyclass(name = "Tree", module = "pytreebary", frozen)]
struct PyTree {
    inner: EmbeddedTree,
}

#[pymethods]
impl PyTree {
    #[new]
    #[pyo3(signature = (parent, weight, n_internal, leaf_points=None))]
    fn new(
        parent: Vec<Option<usize>>,
        weight: Vec<f64>,
        n_internal: usize,
        leaf_points: Option<Vec<usize>>,
    ) -> PyResult<Self> {
        let tree = treebary::Tree::new(parent, weight, n_internal).map_err(err)?;
        let leaf_points = leaf_points.unwrap_or_else(|| (0..tree.n_leaf()).collect());
        Ok(Self { inner: EmbeddedTree::new(tree, leaf_points).map_err(err)? })
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.tree.n_nodes()
    }

    #[getter]
    fn n_leaf(&self) -> usize {
        self.inner.tree.n_leaf()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.tree.depth()
    }

    #[getter]
    fn parent(&self) -> Vec<Option<usize>> {
        self.inner.tree.parents().to_vec()
    }

    #[getter]
    fn weight(&self) -> Vec<f64> {
        self.inner.tree.weights().to_vec()
    }

    #[getter]
    fn leaf_points(&self) -> Vec<usize> {
        self.inner.leaf_points.clone()
    }

    /// Weighted subtree masses `B a` (`a` in leaf order).
    fn subtree_masses(&self, a: Vec<f64>) -> PyResult<Vec<f64>> {
        SubtreeMatrix::build(&self.inner.tree).apply(&a).map_err(err)
    }

    /// Tree-Wasserstein distance; `a` and `b` in leaf order.
    fn distance(&self, a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
        tree_wasserstein_subtree(&self.inner.tree, &a, &b).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Tree(n_nodes={}, n_leaf={}, depth={})", self.n_nodes(), self.n_leaf(), self.depth())
    }
}

fn method(name: &str) -> PyResult<BuildMethod> {
    match name {
        "quadtree" => Ok(BuildMethod::Quadtree),
        "cluster" => Ok(BuildMethod::Cluster),
        "chain" => Ok(BuildMethod::Chain),
        _ => Err(bad(format!("unknown method {name:?}"))),
    }
}

fn weights(name: &str) -> PyResult<WeightScheme> {
    match name {
        "unit" => Ok(WeightScheme::Unit),
        "level-halving" | "gap" => Ok(WeightScheme::LevelHalving),
        _ => Err(bad(format!("unknown weight scheme {name:?}"))),
    }
}

fn solve_config(gamma1: f64, gamma2: f64, iters: usize, init: &str, algorithm: Algorithm) -> PyResult<SolveConfig> {
    let init = match init {
        "mean" => Init::Mean,
        "uniform" => Init::Uniform,
        _ => return Err(bad(format!("unknown init {init:?}"))),
    };
    Ok(SolveConfig { gamma1, gamma2, max_iters: iters, init, algorithm, ..SolveConfig::default() })
}

fn result_dict<'py>(py: Python<'py>, r: SolveResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("a_best", r.a_best)?;
    d.set_item("f_best", r.f_best)?;
    d.set_item("trajectory", r.trajectory)?;
    d.set_item("iterations_run", r.iterations_run)?;
    d.set_item("setup_time", r.setup_time.as_secs_f64())?;
    d.set_item("loop_time", r.loop_time.as_secs_f64())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (points, method="cluster", trees=1, depth=6, branching=5, weights="unit", seed=0, random_shift=true))]
#[allow(clippy::too_many_arguments)]
fn build_trees(
    py: Python<'_>,
    points: &PyPointCloud,
    method: &str,
    trees: usize,
    depth: usize,
    branching: usize,
    weights: &str,
    seed: u64,
    random_shift: bool,
) -> PyResult<Vec<PyTree>> {
    let cfg = BuildConfig {
        method: self::method(method)?,
        depth,
        branching,
        weight_scheme: self::weights(weights)?,
        seed,
        projection: None,
        random_shift,
    };
    cfg.validate().map_err(err)?;
    let built = py.detach(|| sample_ensemble(&points.inner, &cfg, trees)).map_err(err)?;
    Ok(built.into_iter().map(|inner| PyTree { inner }).collect())
}

fn ensemble(trees: &[PyRef<'_, PyTree>]) -> PyResult<TreeEnsemble> {
    TreeEnsemble::new(trees.iter().map(|t| t.inner.clone()).collect()).map_err(err)
}

/// Average tree-Wasserstein distance over the trees; `a`, `b` in support order.
#[pyfunction]
fn tree_sliced_wasserstein(trees: Vec<PyRef<'_, PyTree>>, a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    tsw(&ensemble(&trees)?, &a, &b).map_err(err)
}

#[pyfunction]
fn project_simplex(x: Vec<f64>) -> PyResult<Vec<f64>> {
    treebary::project_simplex(&x).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (trees, inputs, algorithm="fastpsd", gamma1=0.05, gamma2=0.25, iters=1500, init="mean"))]
#[allow(clippy::too_many_arguments)]
fn barycenter<'py>(
    py: Python<'py>,
    trees: Vec<PyRef<'py, PyTree>>,
    inputs: Vec<Vec<f64>>,
    algorithm: &str,
    gamma1: f64,
    gamma2: f64,
    iters: usize,
    init: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let algorithm = match algorithm {
        "psd" => Algorithm::Psd,
        "fastpsd" => Algorithm::FastPsd,
        _ => return Err(bad(format!("unknown algorithm {algorithm:?}"))),
    };
    let cfg = solve_config(gamma1, gamma2, iters, init, algorithm)?;
    let e = ensemble(&trees)?;
    let r = py
        .detach(|| BarycenterProblem::from_ensemble(&e, &inputs).and_then(|p| solve(&p, &cfg)))
        .map_err(err)?;
    result_dict(py, r)
}

#[pyfunction]
#[pyo3(signature = (points, inputs, projections=1, weights="unit", seed=0, gamma1=0.05, gamma2=0.25, iters=1500, init="mean"))]
#[allow(clippy::too_many_arguments)]
fn swb<'py>(
    py: Python<'py>,
    points: &PyPointCloud,
    inputs: Vec<Vec<f64>>,
    projections: usize,
    weights: &str,
    seed: u64,
    gamma1: f64,
    gamma2: f64,
    iters: usize,
    init: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = solve_config(gamma1, gamma2, iters, init, Algorithm::FastPsd)?;
    let scheme = self::weights(weights)?;
    let r = py
        .detach(|| {
            let chains = (0..projections as u64)
                .map(|t| {
                    let b = BuildConfig {
                        method: BuildMethod::Chain,
                        weight_scheme: scheme,
                        seed: seed.wrapping_add(t),
                        ..BuildConfig::default()
                    };
                    Chain::from_points(&points.inner, &b)
                })
                .collect::<treebary::Result<Vec<_>>>()?;
            swb_solve(&chains, &inputs, &cfg)
        })
        .map_err(err)?;
    result_dict(py, r)
}

#[pyfunction]
#[pyo3(signature = (points, inputs, reg=0.01, iters=1000, tol=1e-4, exponent=1.0, normalize_cost=true))]
#[allow(clippy::too_many_arguments)]
fn ibp<'py>(
    py: Python<'py>,
    points: &PyPointCloud,
    inputs: Vec<Vec<f64>>,
    reg: f64,
    iters: usize,
    tol: f64,
    exponent: f64,
    normalize_cost: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = IbpConfig { reg, max_iters: iters, tol };
    let r = py
        .detach(|| {
            let c = build_cost_matrix(&points.inner, exponent)?;
            let c = if normalize_cost { c.normalized_by_max() } else { c };
            ibp_barycenter(&c, &inputs, &cfg)
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("barycenter", r.barycenter)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

/// Average Sinkhorn cost of `candidate` against the inputs.
#[pyfunction]
#[pyo3(signature = (points, inputs, candidate, reg=0.01, iters=1000, tol=1e-4, exponent=1.0, normalize_cost=true))]
#[allow(clippy::too_many_arguments)]
fn evaluate_loss(
    py: Python<'_>,
    points: &PyPointCloud,
    inputs: Vec<Vec<f64>>,
    candidate: Vec<f64>,
    reg: f64,
    iters: usize,
    tol: f64,
    exponent: f64,
    normalize_cost: bool,
) -> PyResult<f64> {
    let cfg = IbpConfig { reg, max_iters: iters, tol };
    py.detach(|| {
        let c = build_cost_matrix(&points.inner, exponent)?;
        let c = if normalize_cost { c.normalized_by_max() } else { c };
        loss(&c, &inputs, &candidate, &cfg)
    })
    .map_err(err)
}

/// Returns `(PointCloud, distributions)`.
#[pyfunction]
#[pyo3(signature = (kind="grid-digits", n_samples=10, size=8, n_points=256, seed=0))]
fn generate_synthetic(
    kind: &str,
    n_samples: usize,
    size: usize,
    n_points: usize,
    seed: u64,
) -> PyResult<(PyPointCloud, Vec<Vec<f64>>)> {
    let kind = match kind {
        "grid-digits" => SynthKind::GridDigits,
        "gaussian-blobs" => SynthKind::GaussianBlobs,
        _ => return Err(bad(format!("unknown kind {kind:?}"))),
    };
    let ds = synth(&SynthConfig { kind, n_samples, size, n_points, seed }).map_err(err)?;
    Ok((PyPointCloud { inner: ds.points }, ds.distributions))
}

#[pymodule]
fn pytreebary(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyTree>()?;
    m.add_function(wrap_pyfunction!(build_trees, m)?)?;
    m.add_function(wrap_pyfunction!(tree_sliced_wasserstein, m)?)?;
    m.add_function(wrap_pyfunction!(project_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(barycenter, m)?)?;
    m.add_function(wrap_pyfunction!(swb, m)?)?;
    m.add_function(wrap_pyfunction!(ibp, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_loss, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    Ok(())
}
