mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use treebary::build::{build_chain, sorted_projection};
use treebary::chain::chain_problem;
use treebary::solver::{objective, solve_observed};
use treebary::{
    project_simplex, tree_wasserstein_subtree, Algorithm, BarycenterProblem, BuildConfig, BuildMethod, Chain,
    PointCloud, SolveConfig, SubtreeMatrix, SubtreeOperator, WeightScheme,
};

proptest! {
    #[test]
    fn projection_is_feasible_and_idempotent(x in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let a = project_simplex(&x).unwrap();
        prop_assert!(a.iter().all(|&v| v >= 0.0));
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        let again = project_simplex(&a).unwrap();
        prop_assert!(max_abs_diff(&a, &again) <= 1e-15);
    }

    #[test]
    fn projection_satisfies_variational_inequality(
        x in prop::collection::vec(-3.0f64..3.0, 2..20),
        seed in any::<u64>(),
    ) {
        // a is the projection iff <x - a, y - a> <= 0 for every simplex y.
        let a = project_simplex(&x).unwrap();
        let mut r = rng(seed);
        for _ in 0..20 {
            let y = random_distribution(&mut r, x.len());
            let ip: f64 = x.iter().zip(&a).zip(&y).map(|((xi, ai), yi)| (xi - ai) * (yi - ai)).sum();
            prop_assert!(ip <= 1e-12);
        }
    }
}

#[test]
fn projection_matches_grid_search() {
    let mut r = rng(20);
    for case in 0..60 {
        let n = 2 + case % 2;
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.5..1.5)).collect();
        let a = project_simplex(&x).unwrap();
        assert!(max_abs_diff(&a, &simplex_grid_argmin(&x)) <= 1e-4, "{x:?}");
    }
}

#[test]
fn chain_kernels_match_generic_products() {
    let mut r = rng(21);
    for _ in 0..50 {
        let n = r.random_range(1..1000);
        let weights: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { r.random_range(0.0..2.0) }).collect();
        let c = Chain::new(weights, (0..n).collect()).unwrap();
        let m = SubtreeMatrix::build(&c.to_tree());
        let a: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let scale = n as f64;
        assert!(max_abs_diff(&c.apply_b(&a).unwrap(), &m.apply(&a).unwrap()) <= 1e-12 * scale);
        assert!(max_abs_diff(&c.apply_b_transpose(&z).unwrap(), &m.apply_transpose(&z).unwrap()) <= 1e-12 * scale);
        let lhs: f64 = c.apply_b(&a).unwrap().iter().zip(&z).map(|(x, y)| x * y).sum();
        let rhs: f64 = c.apply_b_transpose(&z).unwrap().iter().zip(&a).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }
}

fn line_cloud(xs: &[f64]) -> PointCloud {
    PointCloud::with_index_ids(xs.iter().map(|&x| vec![x]).collect()).unwrap()
}

fn gap_config() -> BuildConfig {
    BuildConfig {
        method: BuildMethod::Chain,
        weight_scheme: WeightScheme::LevelHalving,
        projection: Some(vec![1.0]),
        ..BuildConfig::default()
    }
}

#[test]
fn gap_chain_distance_is_one_dimensional_w1() {
    let mut r = rng(22);
    for _ in 0..100 {
        let n = r.random_range(2..60);
        let xs: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let pc = line_cloud(&xs);
        let et = build_chain(&pc, &gap_config()).unwrap();
        let a = random_distribution(&mut r, n);
        let b = random_distribution(&mut r, n);
        let la: Vec<f64> = et.leaf_points.iter().map(|&p| a[p]).collect();
        let lb: Vec<f64> = et.leaf_points.iter().map(|&p| b[p]).collect();
        let d = tree_wasserstein_subtree(&et.tree, &la, &lb).unwrap();
        assert!((d - w1_cdf(&xs, &a, &b)).abs() < 1e-10);
    }
}

#[test]
fn projected_values_are_sorted() {
    let mut r = rng(23);
    let pc = random_cloud(&mut r, 200, 3);
    let (order, values) = sorted_projection(&pc, &BuildConfig { seed: 7, projection: None, ..gap_config() }).unwrap();
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
    let mut seen = order.clone();
    seen.sort();
    assert_eq!(seen, (0..200).collect::<Vec<_>>());
}

#[test]
fn chain_objective_is_average_w1() {
    let xs = [0.0, 0.7, 1.1, 2.5, 4.0];
    let pc = line_cloud(&xs);
    let chain = Chain::from_points(&pc, &gap_config()).unwrap();
    let mut p_mass = vec![0.0; 5];
    let mut q_mass = vec![0.0; 5];
    p_mass[1] = 1.0;
    q_mass[4] = 1.0;
    let inputs = vec![p_mass, q_mass];
    let chains = [chain];
    let problem = chain_problem(&chains, &inputs).unwrap();
    let mut r = rng(24);
    for _ in 0..50 {
        let a = random_distribution(&mut r, 5);
        let want = (w1_cdf(&xs, &a, &inputs[0]) + w1_cdf(&xs, &a, &inputs[1])) / 2.0;
        assert!((objective(&problem, &a).unwrap() - want).abs() < 1e-10);
    }
}

#[test]
fn chain_solver_matches_tree_solver() {
    let mut r = rng(25);
    let n = 40;
    let xs: Vec<f64> = (0..n).map(|_| r.random_range(0.0..10.0)).collect();
    let pc = line_cloud(&xs);
    let chain = Chain::from_points(&pc, &gap_config()).unwrap();
    let et = chain.to_embedded();
    let m = SubtreeMatrix::build(&et.tree);
    assert_eq!(m.n_rows(), chain.n_rows());
    let inputs: Vec<Vec<f64>> = (0..8).map(|_| random_distribution(&mut r, n)).collect();
    let cfg = SolveConfig { algorithm: Algorithm::FastPsd, max_iters: 200, ..Default::default() };

    let chains = [chain];
    let mut via_chain = Vec::new();
    solve_observed(&chain_problem(&chains, &inputs).unwrap(), &cfg, |_, a, _| via_chain.push(a.to_vec())).unwrap();
    let tree_problem = BarycenterProblem::from_matrix(&m, &et.leaf_points, &inputs).unwrap();
    let mut via_tree = Vec::new();
    solve_observed(&tree_problem, &cfg, |_, a, _| via_tree.push(a.to_vec())).unwrap();
    assert_eq!(via_chain.len(), via_tree.len());
    for (a, b) in via_chain.iter().zip(&via_tree) {
        assert!(max_abs_diff(a, b) <= 1e-12);
    }
}
