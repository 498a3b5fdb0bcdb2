//! Projected subgradient descent for fixed-support tree-(sliced-)Wasserstein
//! barycenters.
//!
//! The objective is `f(a) = 1/T sum_t 1/N sum_i ||B_t a - B_t a_i||_1` over the
//! probability simplex. Two evaluators share one iteration loop:
//!
//! * naive: for each row `j`, scan all `N` input values `[B a_i]_j`;
//! * fast: sort each row once, then binary-search the query and read the
//!   absolute-deviation sum off stored prefix sums.
//!
//! Both use `sign(0) = +1`, so on identical inputs they produce identical
//! subgradients (the `z` vectors are exact small integers) and therefore
//! identical iterates.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::simplex::project_simplex;
use crate::transport::TreeEnsemble;
use crate::tree::{SubtreeMatrix, SubtreeOperator};

const MIN_ROWS_PER_TASK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Psd,
    FastPsd,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Average of the inputs.
    Mean,
    Uniform,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub max_iters: usize,
    pub init: Init,
    pub track_trajectory: bool,
    pub algorithm: Algorithm,
    /// Stop once `f_best` improved by less than `1e-12` (relative) over the
    /// last 100 iterations.
    pub early_stop: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            gamma1: 0.05,
            gamma2: 0.25,
            max_iters: 1500,
            init: Init::Mean,
            track_trajectory: true,
            algorithm: Algorithm::FastPsd,
            early_stop: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1 > 0.0 && self.gamma1.is_finite()) {
            return Err(Error::Config(format!("gamma1 must be positive, got {}", self.gamma1)));
        }
        if !(self.gamma2 > 0.0 && self.gamma2 <= 1.0) {
            return Err(Error::Config(format!("gamma2 must lie in (0, 1], got {}", self.gamma2)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub a_best: Vec<f64>,
    pub f_best: f64,
    /// `f(a^(k))` for `k = 0..=iterations_run` when tracked.
    pub trajectory: Vec<f64>,
    pub iterations_run: usize,
    /// Set when a zero subgradient proved the current iterate optimal.
    pub stopped_at_zero_subgradient: bool,
    pub setup_time: Duration,
    pub loop_time: Duration,
}

/// One tree of the problem: its subtree operator and where its leaves sit
/// in the common support order.
#[derive(Debug, Clone)]
pub struct Slice<'a, Op> {
    pub op: &'a Op,
    pub leaf_points: &'a [usize],
}

/// Inputs plus the tree operators that define the objective.
#[derive(Debug, Clone)]
pub struct BarycenterProblem<'a, Op> {
    slices: Vec<Slice<'a, Op>>,
    inputs: &'a [Vec<f64>],
    n_support: usize,
}

impl<'a, Op: SubtreeOperator> BarycenterProblem<'a, Op> {
    pub fn new(slices: Vec<Slice<'a, Op>>, inputs: &'a [Vec<f64>]) -> Result<Self> {
        let first = slices.first().ok_or(Error::Empty("tree list"))?;
        let n_support = first.leaf_points.len();
        if inputs.is_empty() {
            return Err(Error::Empty("input distributions"));
        }
        for s in &slices {
            check_len(s.op.n_cols(), s.leaf_points.len())?;
            let mut seen = vec![false; n_support];
            for &p in s.leaf_points {
                if p >= n_support || std::mem::replace(&mut seen[p], true) {
                    return Err(Error::Support(format!("support {p} missing or repeated among leaves")));
                }
            }
            if s.leaf_points.len() != n_support {
                return Err(Error::Support("trees disagree on the support size".into()));
            }
        }
        for a in inputs {
            check_len(n_support, a.len())?;
            if let Some(i) = a.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(Self { slices, inputs, n_support })
    }

    pub fn n_support(&self) -> usize {
        self.n_support
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_trees(&self) -> usize {
        self.slices.len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        self.inputs
    }

    fn check_point(&self, a: &[f64]) -> Result<()> {
        check_len(self.n_support, a.len())
    }
}

impl<'a> BarycenterProblem<'a, SubtreeMatrix> {
    /// Single tree whose leaf order is the support order.
    pub fn from_matrix(m: &'a SubtreeMatrix, leaf_points: &'a [usize], inputs: &'a [Vec<f64>]) -> Result<Self> {
        Self::new(vec![Slice { op: m, leaf_points }], inputs)
    }

    pub fn from_ensemble(e: &'a TreeEnsemble, inputs: &'a [Vec<f64>]) -> Result<Self> {
        let slices = e
            .members()
            .iter()
            .map(|m| Slice { op: &m.matrix, leaf_points: &m.embedded.leaf_points[..] })
            .collect();
        Self::new(slices, inputs)
    }
}

fn to_leaf_order(x: &[f64], leaf_points: &[usize], out: &mut [f64]) {
    for (o, &p) in out.iter_mut().zip(leaf_points) {
        *o = x[p];
    }
}

/// Row-major `rows x N` matrix of `[B a_i]_j`.
fn input_rows<Op: SubtreeOperator>(slice: &Slice<'_, Op>, inputs: &[Vec<f64>]) -> Vec<f64> {
    let n = inputs.len();
    let rows = slice.op.n_rows();
    let products: Vec<Vec<f64>> = inputs
        .par_iter()
        .map(|a| {
            let mut leaf = vec![0.0; slice.leaf_points.len()];
            to_leaf_order(a, slice.leaf_points, &mut leaf);
            let mut out = vec![0.0; rows];
            slice.op.apply_into(&leaf, &mut out);
            out
        })
        .collect();
    let mut values = vec![0.0; rows * n];
    values.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = products[i][j];
        }
    });
    values
}

/// Direct objective: `1/T sum_t 1/N sum_i ||B_t a - B_t a_i||_1`.
pub fn objective<Op: SubtreeOperator>(p: &BarycenterProblem<'_, Op>, a: &[f64]) -> Result<f64> {
    p.check_point(a)?;
    let mut per_tree = Vec::with_capacity(p.slices.len());
    for s in &p.slices {
        let mut leaf = vec![0.0; s.leaf_points.len()];
        let mut ba = vec![0.0; s.op.n_rows()];
        let mut bi = vec![0.0; s.op.n_rows()];
        to_leaf_order(a, s.leaf_points, &mut leaf);
        s.op.apply_into(&leaf, &mut ba);
        let mut acc = CompensatedSum::new();
        for input in p.inputs {
            to_leaf_order(input, s.leaf_points, &mut leaf);
            s.op.apply_into(&leaf, &mut bi);
            acc.add(compensated_sum(ba.iter().zip(&bi).map(|(x, y)| (x - y).abs())));
        }
        per_tree.push(acc.value() / p.inputs.len() as f64);
    }
    Ok(compensated_sum(per_tree) / p.slices.len() as f64)
}

/// `1/T sum_t 1/N B_tᵀ sum_i sign(B_t a - B_t a_i)` with `sign(0) = +1`,
/// evaluated by scanning every input.
pub fn subgradient_naive<Op: SubtreeOperator>(p: &BarycenterProblem<'_, Op>, a: &[f64]) -> Result<Vec<f64>> {
    Prepared::new(p, Algorithm::Psd).subgradient(a)
}

/// Per-row sorted input values with prefix sums.
///
/// Each row is stored as `[value_i, prefix_i]` pairs, where `prefix_i` is
/// the sum of the `i` smallest values, so a search and the prefix lookup
/// that follows it land on the same cache line.
#[derive(Debug, Clone)]
pub struct SortedColumnIndex {
    n: usize,
    pairs: Vec<[f64; 2]>,
    full: Vec<f64>,
    total: Vec<f64>,
}

/// Borrowed view of one row of a [`SortedColumnIndex`].
#[derive(Debug, Clone, Copy)]
pub struct SortedRow<'a> {
    pairs: &'a [[f64; 2]],
    full: f64,
    pub total: f64,
}

impl SortedColumnIndex {
    /// Builds the index from a row-major `rows x n` value matrix.
    pub fn from_rows(values: &[f64], n: usize) -> Self {
        assert!(n > 0 && values.len().is_multiple_of(n));
        let rows = values.len() / n;
        let mut pairs = vec![[0.0; 2]; rows * n];
        let mut full = vec![0.0; rows];
        let mut total = vec![0.0; rows];
        pairs
            .par_chunks_mut(n)
            .zip(full.par_iter_mut())
            .zip(total.par_iter_mut())
            .zip(values.par_chunks(n))
            .with_min_len(64)
            .for_each(|(((out, full), tot), row)| {
                let mut sorted = row.to_vec();
                sorted.sort_unstable_by(f64::total_cmp);
                let mut acc = 0.0;
                for (pair, &v) in out.iter_mut().zip(&sorted) {
                    *pair = [v, acc];
                    acc += v;
                }
                *full = acc;
                *tot = compensated_sum(sorted.iter().copied());
            });
        Self { n, pairs, full, total }
    }

    pub fn n_rows(&self) -> usize {
        self.total.len()
    }

    pub fn n_values(&self) -> usize {
        self.n
    }

    pub fn row(&self, j: usize) -> SortedRow<'_> {
        SortedRow { pairs: &self.pairs[j * self.n..(j + 1) * self.n], full: self.full[j], total: self.total[j] }
    }

    /// 1-based insertion position of `query` in row `j`, placed after any
    /// equal values so that ties count as `sign(0) = +1`.
    pub fn insertion_index(&self, j: usize, query: f64) -> usize {
        self.row(j).insertion_index(query)
    }

    pub fn fast_z_entry(&self, j: usize, query: f64) -> i64 {
        self.row(j).z_entry(query)
    }

    pub fn fast_objective_entry(&self, j: usize, query: f64, l: usize) -> f64 {
        self.row(j).objective_entry(query, l)
    }
}

impl SortedRow<'_> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The `i`-th smallest value.
    pub fn value(&self, i: usize) -> f64 {
        self.pairs[i][0]
    }

    /// Sum of the `l` smallest values, `l = 0..=N`.
    pub fn prefix(&self, l: usize) -> f64 {
        if l == self.pairs.len() {
            self.full
        } else {
            self.pairs[l][1]
        }
    }

    pub fn insertion_index(&self, query: f64) -> usize {
        self.pairs.partition_point(|p| p[0] <= query) + 1
    }

    /// Same result as [`Self::insertion_index`], searched outward from a
    /// previous position `hint` (any value is accepted). Iterates move
    /// little between steps, so this usually touches one cache line.
    pub fn insertion_index_near(&self, query: f64, hint: usize) -> usize {
        let v = self.pairs;
        let n = v.len();
        // Count of values <= query lies in [lo, hi].
        let k = hint.saturating_sub(1).min(n);
        let (mut lo, mut hi);
        if k > 0 && v[k - 1][0] > query {
            hi = k - 1;
            let mut step = 1;
            loop {
                if step > hi {
                    lo = 0;
                    break;
                }
                if v[hi - step][0] <= query {
                    lo = hi - step + 1;
                    break;
                }
                hi -= step;
                step *= 2;
            }
        } else {
            lo = k;
            let mut step = 1;
            loop {
                if lo + step > n {
                    hi = n;
                    break;
                }
                if v[lo + step - 1][0] > query {
                    hi = lo + step - 1;
                    break;
                }
                lo += step;
                step *= 2;
            }
        }
        lo + v[lo..hi].partition_point(|p| p[0] <= query) + 1
    }

    /// `sum_i sign(query - v_i)` as `-N + 2l - 2`.
    pub fn z_entry(&self, query: f64) -> i64 {
        let l = self.insertion_index(query) as i64;
        -(self.pairs.len() as i64) + 2 * l - 2
    }

    /// `sum_i |query - v_i|` for any insertion position `l` consistent with `query`.
    pub fn objective_entry(&self, query: f64, l: usize) -> f64 {
        let n = self.pairs.len() as f64;
        self.total - 2.0 * self.prefix(l - 1) - (n - 2.0 * l as f64 + 2.0) * query
    }
}

pub fn build_sorted_index<Op: SubtreeOperator>(
    p: &BarycenterProblem<'_, Op>,
) -> Vec<SortedColumnIndex> {
    p.slices.iter().map(|s| SortedColumnIndex::from_rows(&input_rows(s, p.inputs), p.inputs.len())).collect()
}

enum RowData {
    Naive(Vec<f64>),
    Fast(SortedColumnIndex),
}

/// Per-tree scratch buffers for one evaluation.
struct Scratch {
    leaf: Vec<f64>,
    b: Vec<f64>,
    z: Vec<f64>,
    row_obj: Vec<f64>,
    grad_leaf: Vec<f64>,
    /// Last insertion position per row, a search hint for the fast path.
    pos: Vec<usize>,
}

/// A problem with its per-row data precomputed for one algorithm.
pub struct Prepared<'p, 'a, Op> {
    problem: &'p BarycenterProblem<'a, Op>,
    rows: Vec<RowData>,
}

impl<'p, 'a, Op: SubtreeOperator> Prepared<'p, 'a, Op> {
    pub fn new(problem: &'p BarycenterProblem<'a, Op>, algorithm: Algorithm) -> Self {
        let n = problem.inputs.len();
        let rows = problem
            .slices
            .iter()
            .map(|s| {
                let values = input_rows(s, problem.inputs);
                match algorithm {
                    Algorithm::Psd => RowData::Naive(values),
                    Algorithm::FastPsd => RowData::Fast(SortedColumnIndex::from_rows(&values, n)),
                }
            })
            .collect();
        Self { problem, rows }
    }

    fn scratch(&self) -> Vec<Scratch> {
        self.problem
            .slices
            .iter()
            .map(|s| Scratch {
                leaf: vec![0.0; s.op.n_cols()],
                b: vec![0.0; s.op.n_rows()],
                z: vec![0.0; s.op.n_rows()],
                row_obj: vec![0.0; s.op.n_rows()],
                grad_leaf: vec![0.0; s.op.n_cols()],
                pos: vec![0; s.op.n_rows()],
            })
            .collect()
    }

    /// Computes `z` for every tree at `a` and returns `f(a)`.
    fn evaluate(&self, a: &[f64], scratch: &mut [Scratch]) -> f64 {
        let n = self.problem.inputs.len();
        let mut per_tree = Vec::with_capacity(scratch.len());
        for ((s, data), sc) in self.problem.slices.iter().zip(&self.rows).zip(scratch.iter_mut()) {
            to_leaf_order(a, s.leaf_points, &mut sc.leaf);
            s.op.apply_into(&sc.leaf, &mut sc.b);
            let b = &sc.b;
            match data {
                RowData::Naive(values) => {
                    sc.z.par_iter_mut()
                        .zip(sc.row_obj.par_iter_mut())
                        .enumerate()
                        .with_min_len(MIN_ROWS_PER_TASK)
                        .for_each(|(j, (z, obj))| {
                            let q = b[j];
                            let mut sign_sum = 0i64;
                            let mut abs_sum = 0.0;
                            for &v in &values[j * n..(j + 1) * n] {
                                sign_sum += if q >= v { 1 } else { -1 };
                                abs_sum += (q - v).abs();
                            }
                            *z = sign_sum as f64;
                            *obj = abs_sum;
                        });
                }
                RowData::Fast(index) => {
                    sc.z.par_iter_mut()
                        .zip(sc.row_obj.par_iter_mut())
                        .zip(sc.pos.par_iter_mut())
                        .enumerate()
                        .with_min_len(MIN_ROWS_PER_TASK)
                        .for_each(|(j, ((z, obj), pos))| {
                            let row = index.row(j);
                            let q = b[j];
                            let l = row.insertion_index_near(q, *pos);
                            *pos = l;
                            *z = (2 * l as i64 - 2 - n as i64) as f64;
                            *obj = row.objective_entry(q, l);
                        });
                }
            }
            per_tree.push(compensated_sum(sc.row_obj.iter().copied()) / n as f64);
        }
        compensated_sum(per_tree) / scratch.len() as f64
    }

    /// Averages `1/N B_tᵀ z_t` over trees into `g` (support order).
    fn gradient(&self, scratch: &mut [Scratch], g: &mut [f64]) {
        let n = self.problem.inputs.len() as f64;
        let t_count = scratch.len() as f64;
        g.fill(0.0);
        for (s, sc) in self.problem.slices.iter().zip(scratch.iter_mut()) {
            s.op.apply_transpose_into(&sc.z, &mut sc.grad_leaf);
            for (&p, &gl) in s.leaf_points.iter().zip(&sc.grad_leaf) {
                g[p] += gl / n;
            }
        }
        if t_count != 1.0 {
            g.iter_mut().for_each(|x| *x /= t_count);
        }
    }

    pub fn objective(&self, a: &[f64]) -> Result<f64> {
        self.problem.check_point(a)?;
        let mut scratch = self.scratch();
        Ok(self.evaluate(a, &mut scratch))
    }

    pub fn subgradient(&self, a: &[f64]) -> Result<Vec<f64>> {
        self.problem.check_point(a)?;
        let mut scratch = self.scratch();
        self.evaluate(a, &mut scratch);
        let mut g = vec![0.0; self.problem.n_support];
        self.gradient(&mut scratch, &mut g);
        Ok(g)
    }
}

fn initial_point<Op>(p: &BarycenterProblem<'_, Op>, init: &Init) -> Result<Vec<f64>> {
    let n = p.n_support;
    match init {
        Init::Uniform => Ok(vec![1.0 / n as f64; n]),
        Init::Mean => {
            let mut a = vec![0.0; n];
            for input in p.inputs {
                for (x, v) in a.iter_mut().zip(input) {
                    *x += v;
                }
            }
            let total: f64 = a.iter().sum();
            a.iter_mut().for_each(|x| *x /= total);
            Ok(a)
        }
        Init::Given(a) => {
            check_len(n, a.len())?;
            project_simplex(a)
        }
    }
}

pub fn solve<Op: SubtreeOperator>(p: &BarycenterProblem<'_, Op>, cfg: &SolveConfig) -> Result<SolveResult> {
    solve_observed(p, cfg, |_, _, _| {})
}

/// Like [`solve`], calling `observer(k, a^(k), f(a^(k)))` for every iterate
/// including `k = 0`.
pub fn solve_observed<Op, F>(p: &BarycenterProblem<'_, Op>, cfg: &SolveConfig, mut observer: F) -> Result<SolveResult>
where
    Op: SubtreeOperator,
    F: FnMut(usize, &[f64], f64),
{
    cfg.validate()?;
    let setup_start = Instant::now();
    let prepared = Prepared::new(p, cfg.algorithm);
    let mut scratch = prepared.scratch();
    let mut a = initial_point(p, &cfg.init)?;
    let setup_time = setup_start.elapsed();

    let loop_start = Instant::now();
    let mut f = prepared.evaluate(&a, &mut scratch);
    observer(0, &a, f);
    let mut a_best = a.clone();
    let mut f_best = f;
    let mut trajectory = Vec::new();
    if cfg.track_trajectory {
        trajectory.reserve(cfg.max_iters + 1);
        trajectory.push(f);
    }
    let mut g = vec![0.0; p.n_support];
    let mut x = vec![0.0; p.n_support];
    let mut iterations_run = 0;
    let mut stopped_at_zero_subgradient = false;
    let mut best_history = Vec::new();

    for k in 0..cfg.max_iters {
        prepared.gradient(&mut scratch, &mut g);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            stopped_at_zero_subgradient = true;
            break;
        }
        let step = cfg.gamma1 / ((k + 1) as f64).powf(cfg.gamma2) / norm;
        for ((xi, ai), gi) in x.iter_mut().zip(&a).zip(&g) {
            *xi = ai - step * gi;
        }
        a = project_simplex(&x)?;
        f = prepared.evaluate(&a, &mut scratch);
        iterations_run = k + 1;
        observer(iterations_run, &a, f);
        if cfg.track_trajectory {
            trajectory.push(f);
        }
        if f_best > f {
            f_best = f;
            a_best.copy_from_slice(&a);
        }
        if cfg.early_stop {
            best_history.push(f_best);
            if best_history.len() > 100 {
                let old = best_history[best_history.len() - 101];
                if old - f_best <= 1e-12 * old.abs() {
                    break;
                }
            }
        }
    }

    Ok(SolveResult {
        a_best,
        f_best,
        trajectory,
        iterations_run,
        stopped_at_zero_subgradient,
        setup_time,
        loop_time: loop_start.elapsed(),
    })
}

pub fn psd_solve<Op: SubtreeOperator>(p: &BarycenterProblem<'_, Op>, cfg: &SolveConfig) -> Result<SolveResult> {
    solve(p, &SolveConfig { algorithm: Algorithm::Psd, ..cfg.clone() })
}

pub fn fastpsd_solve<Op: SubtreeOperator>(p: &BarycenterProblem<'_, Op>, cfg: &SolveConfig) -> Result<SolveResult> {
    solve(p, &SolveConfig { algorithm: Algorithm::FastPsd, ..cfg.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Tree;

    fn star() -> (SubtreeMatrix, Vec<usize>) {
        let t = Tree::new(vec![None, Some(0), Some(0)], vec![0.0, 1.0, 1.0], 1).unwrap();
        (SubtreeMatrix::build(&t), vec![0, 1])
    }

    fn brute_z(values: &[f64], q: f64) -> i64 {
        values.iter().map(|&v| if q - v >= 0.0 { 1 } else { -1 }).sum()
    }

    #[test]
    fn hinted_search_matches_plain_search() {
        let values = [0.1, 0.2, 0.2, 0.2, 0.5, 0.9, 0.9, 1.3];
        let idx = SortedColumnIndex::from_rows(&values, values.len());
        let row = idx.row(0);
        for q in [-1.0, 0.1, 0.15, 0.2, 0.3, 0.5, 0.9, 1.0, 1.3, 2.0] {
            for hint in 0..=values.len() + 3 {
                assert_eq!(row.insertion_index_near(q, hint), row.insertion_index(q), "q={q} hint={hint}");
            }
        }
    }

    #[test]
    fn sorted_index_row() {
        let idx = SortedColumnIndex::from_rows(&[0.5, 0.1, 0.2], 3);
        let row = idx.row(0);
        assert_eq!((0..3).map(|i| row.value(i)).collect::<Vec<_>>(), [0.1, 0.2, 0.5]);
        assert_eq!(row.prefix(0), 0.0);
        assert_eq!(row.prefix(1), 0.1);
        assert!((row.prefix(2) - 0.3).abs() < 1e-15);
        assert!((row.prefix(3) - 0.8).abs() < 1e-15);
        assert!((row.total - 0.8).abs() < 1e-15);

        let single = SortedColumnIndex::from_rows(&[0.7], 1);
        assert_eq!([single.row(0).prefix(0), single.row(0).prefix(1)], [0.0, 0.7]);
        let flat = SortedColumnIndex::from_rows(&[0.25; 4], 4);
        assert_eq!((0..=4).map(|l| flat.row(0).prefix(l)).collect::<Vec<_>>(), [0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn z_entry_examples() {
        let idx = SortedColumnIndex::from_rows(&[0.5, 0.1, 0.2], 3);
        assert_eq!(idx.insertion_index(0, 0.3), 3);
        assert_eq!(idx.fast_z_entry(0, 0.3), 1);
        assert_eq!(idx.fast_z_entry(0, -1.0), -3);
        assert_eq!(idx.fast_z_entry(0, 9.0), 3);
        for q in [0.1, 0.2, 0.5] {
            assert_eq!(idx.fast_z_entry(0, q), brute_z(&[0.5, 0.1, 0.2], q));
        }
    }

    #[test]
    fn objective_entry_examples() {
        let idx = SortedColumnIndex::from_rows(&[0.5, 0.1, 0.2], 3);
        assert!((idx.fast_objective_entry(0, 0.3, 3) - 0.5).abs() < 1e-15);
        // median tie: any consistent l gives the same sum
        for l in [2, 3] {
            assert!((idx.fast_objective_entry(0, 0.2, l) - 0.4).abs() < 1e-15);
        }
        let below = idx.fast_objective_entry(0, 0.05, 1);
        assert!((below - (0.8 - 3.0 * 0.05)).abs() < 1e-15);
    }

    #[test]
    fn flat_objective_on_star() {
        let (m, lp) = star();
        let inputs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let p = BarycenterProblem::from_matrix(&m, &lp, &inputs).unwrap();
        for t in [0.0, 0.25, 0.5, 1.0] {
            assert!((objective(&p, &[t, 1.0 - t]).unwrap() - 1.0).abs() < 1e-15);
        }
        for alg in [Algorithm::Psd, Algorithm::FastPsd] {
            let cfg = SolveConfig { algorithm: alg, max_iters: 50, ..Default::default() };
            let r = solve(&p, &cfg).unwrap();
            assert_eq!(r.f_best, 1.0);
            assert!(r.trajectory.iter().all(|&f| (f - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn identical_inputs_start_optimal() {
        let (m, lp) = star();
        let inputs = vec![vec![0.3, 0.7], vec![0.3, 0.7]];
        let p = BarycenterProblem::from_matrix(&m, &lp, &inputs).unwrap();
        let r = fastpsd_solve(&p, &SolveConfig { max_iters: 20, ..Default::default() }).unwrap();
        assert_eq!(r.f_best, 0.0);
        assert_eq!(r.trajectory[0], 0.0);
        assert_eq!(r.a_best, vec![0.3, 0.7]);
    }

    #[test]
    fn single_input_objective_is_distance() {
        let (m, lp) = star();
        let inputs = vec![vec![0.9, 0.1]];
        let p = BarycenterProblem::from_matrix(&m, &lp, &inputs).unwrap();
        let d = crate::transport::tree_wasserstein_matrix(&m, &[0.4, 0.6], &inputs[0]).unwrap();
        assert!((objective(&p, &[0.4, 0.6]).unwrap() - d).abs() < 1e-15);
    }

    #[test]
    fn symmetric_star_subgradient() {
        let (m, lp) = star();
        let inputs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let p = BarycenterProblem::from_matrix(&m, &lp, &inputs).unwrap();
        let g = subgradient_naive(&p, &[1.0, 0.0]).unwrap();
        assert_eq!((g[0] - g[1]).abs(), 1.0);
    }

    #[test]
    fn config_validation() {
        let bad = [
            SolveConfig { gamma1: 0.0, ..Default::default() },
            SolveConfig { gamma2: 0.0, ..Default::default() },
            SolveConfig { gamma2: 1.5, ..Default::default() },
            SolveConfig { max_iters: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
        assert!(SolveConfig { gamma2: 1.0, ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn dimension_checks() {
        let (m, lp) = star();
        let bad_inputs = vec![vec![1.0, 0.0, 0.0]];
        assert!(BarycenterProblem::from_matrix(&m, &lp, &bad_inputs).is_err());
        let inputs = vec![vec![1.0, 0.0]];
        let p = BarycenterProblem::from_matrix(&m, &lp, &inputs).unwrap();
        assert!(objective(&p, &[1.0]).is_err());
    }
}
