mod common;

use common::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use treebary::solver::{objective, solve_observed, subgradient_naive, Prepared};
use treebary::{
    solve, Algorithm, BarycenterProblem, EmbeddedTree, Init, SolveConfig, SortedColumnIndex, SubtreeMatrix,
    TreeEnsemble,
};

fn sorted_case(r: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, f64) {
    // A coarse value grid makes ties with the query common.
    let values: Vec<f64> = (0..n).map(|_| r.random_range(0..20) as f64 * 0.05).collect();
    let q = if r.random_bool(0.5) { values[r.random_range(0..n)] } else { r.random_range(-0.2..1.2) };
    (values, q)
}

#[test]
fn fast_entries_match_brute_force() {
    let mut r = rng(10);
    for case in 0..4000 {
        let n = [1, 2, 5, 100][case % 4];
        let (values, q) = sorted_case(&mut r, n);
        let idx = SortedColumnIndex::from_rows(&values, n);
        assert_eq!(idx.fast_z_entry(0, q), brute_sign_sum(&values, q));
        let l = idx.insertion_index(0, q);
        let want = brute_abs_sum(&values, q);
        let got = idx.fast_objective_entry(0, q, l);
        assert!((got - want).abs() <= 1e-10 * want.max(1.0), "{got} vs {want}");
    }
}

struct Instance {
    trees: Vec<EmbeddedTree>,
    inputs: Vec<Vec<f64>>,
}

impl Instance {
    fn random(r: &mut ChaCha8Rng, n_trees: usize, n_leaf: usize, n_inputs: usize, max_depth: usize) -> Self {
        let trees = (0..n_trees).map(|_| embed(random_shallow_tree(r, n_leaf, max_depth), r)).collect();
        let inputs = (0..n_inputs).map(|_| random_distribution(r, n_leaf)).collect();
        Self { trees, inputs }
    }

    fn ensemble(&self) -> TreeEnsemble {
        TreeEnsemble::new(self.trees.clone()).unwrap()
    }

    /// Objective from dense matrices and plain loops.
    fn dense_objective(&self, a: &[f64]) -> f64 {
        let mut total = 0.0;
        for et in &self.trees {
            let b = dense_subtree_oracle(&et.tree);
            let order = |x: &[f64]| et.leaf_points.iter().map(|&p| x[p]).collect::<Vec<_>>();
            let ba = dense_apply(&b, &order(a));
            for input in &self.inputs {
                let bi = dense_apply(&b, &order(input));
                total += ba.iter().zip(&bi).map(|(x, y)| (x - y).abs()).sum::<f64>() / self.inputs.len() as f64;
            }
        }
        total / self.trees.len() as f64
    }
}

#[test]
fn objective_matches_dense_oracle() {
    let mut r = rng(11);
    for _ in 0..20 {
        let inst = Instance::random(&mut r, 3, 15, 6, 5);
        let e = inst.ensemble();
        let p = BarycenterProblem::from_ensemble(&e, &inst.inputs).unwrap();
        let a = random_distribution(&mut r, 15);
        let want = inst.dense_objective(&a);
        assert!((objective(&p, &a).unwrap() - want).abs() < 1e-12);
        for alg in [Algorithm::Psd, Algorithm::FastPsd] {
            assert!((Prepared::new(&p, alg).objective(&a).unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn subgradient_inequality_and_agreement() {
    let mut r = rng(12);
    for _ in 0..10 {
        let inst = Instance::random(&mut r, 2, 12, 5, 4);
        let e = inst.ensemble();
        let p = BarycenterProblem::from_ensemble(&e, &inst.inputs).unwrap();
        let fast = Prepared::new(&p, Algorithm::FastPsd);
        for _ in 0..30 {
            let a = random_distribution(&mut r, 12);
            let b = random_distribution(&mut r, 12);
            let g = subgradient_naive(&p, &a).unwrap();
            assert_eq!(g, fast.subgradient(&a).unwrap());
            let fa = objective(&p, &a).unwrap();
            let fb = objective(&p, &b).unwrap();
            let lin: f64 = g.iter().zip(b.iter().zip(&a)).map(|(gi, (bi, ai))| gi * (bi - ai)).sum();
            assert!(fb >= fa + lin - 1e-9);
        }
    }
}

#[test]
fn objective_is_convex_along_segments() {
    let mut r = rng(13);
    let inst = Instance::random(&mut r, 2, 10, 4, 4);
    let e = inst.ensemble();
    let p = BarycenterProblem::from_ensemble(&e, &inst.inputs).unwrap();
    for _ in 0..200 {
        let x = random_distribution(&mut r, 10);
        let y = random_distribution(&mut r, 10);
        let t: f64 = r.random();
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let lhs = objective(&p, &mid).unwrap();
        let rhs = t * objective(&p, &x).unwrap() + (1.0 - t) * objective(&p, &y).unwrap();
        assert!(lhs <= rhs + 1e-12);
    }
}

fn iterates(p: &BarycenterProblem<'_, SubtreeMatrix>, alg: Algorithm, iters: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut seq = Vec::new();
    let cfg = SolveConfig { algorithm: alg, max_iters: iters, ..Default::default() };
    let r = solve_observed(p, &cfg, |_, a, _| seq.push(a.to_vec())).unwrap();
    (seq, r.trajectory)
}

#[test]
fn psd_and_fastpsd_move_in_lockstep() {
    let mut r = rng(14);
    for _ in 0..5 {
        let inst = Instance::random(&mut r, 2, 30, 10, 6);
        let e = inst.ensemble();
        let p = BarycenterProblem::from_ensemble(&e, &inst.inputs).unwrap();
        let (slow, fs) = iterates(&p, Algorithm::Psd, 100);
        let (fast, ff) = iterates(&p, Algorithm::FastPsd, 100);
        assert_eq!(slow.len(), fast.len());
        for (a, b) in slow.iter().zip(&fast) {
            assert!(max_abs_diff(a, b) <= 1e-12);
        }
        assert!(max_abs_diff(&fs, &ff) <= 1e-12);
    }
}

#[test]
fn result_bookkeeping() {
    let mut r = rng(15);
    let inst = Instance::random(&mut r, 3, 20, 8, 5);
    let e = inst.ensemble();
    let p = BarycenterProblem::from_ensemble(&e, &inst.inputs).unwrap();
    let res = solve(&p, &SolveConfig { max_iters: 300, ..Default::default() }).unwrap();
    assert_eq!(res.trajectory.len(), res.iterations_run + 1);
    let min = res.trajectory.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(res.f_best, min);
    assert!((objective(&p, &res.a_best).unwrap() - res.f_best).abs() < 1e-10);
    assert!(res.f_best <= res.trajectory[0]);
    assert!((res.a_best.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(res.a_best.iter().all(|&x| x >= 0.0));
}

#[test]
fn single_input_is_its_own_barycenter() {
    let mut r = rng(16);
    let inst = Instance::random(&mut r, 2, 15, 1, 4);
    let e = inst.ensemble();
    let p = BarycenterProblem::from_ensemble(&e, &inst.inputs).unwrap();
    let res = solve(&p, &SolveConfig { max_iters: 50, ..Default::default() }).unwrap();
    assert_eq!(res.f_best, 0.0);
    assert!(max_abs_diff(&res.a_best, &inst.inputs[0]) < 1e-15);

    // From a uniform start the solver still makes progress toward it.
    let res = solve(&p, &SolveConfig { max_iters: 500, init: Init::Uniform, ..Default::default() }).unwrap();
    assert!(res.f_best < res.trajectory[0]);
}

#[test]
fn early_stop_only_shortens_runs() {
    let mut r = rng(17);
    let inst = Instance::random(&mut r, 1, 10, 2, 3);
    let e = inst.ensemble();
    let p = BarycenterProblem::from_ensemble(&e, &inst.inputs).unwrap();
    let full = solve(&p, &SolveConfig { max_iters: 2000, ..Default::default() }).unwrap();
    let early = solve(&p, &SolveConfig { max_iters: 2000, early_stop: true, ..Default::default() }).unwrap();
    assert!(early.iterations_run <= full.iterations_run);
    assert_eq!(early.trajectory[..], full.trajectory[..early.trajectory.len()]);
}
