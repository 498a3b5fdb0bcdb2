//! Tree metrics over point clouds: randomized quadtrees, farthest-point
//! clustering trees, and chains from 1-D projections.
//!
//! `BuildConfig::depth` bounds the depth of the produced tree: partition
//! cells live on levels `0..depth - 1` and points hang as leaves at most
//! `depth` edges below the root. Unary cells are folded away afterwards.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::points::PointCloud;
use crate::tree::{compact_tree, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildMethod {
    Quadtree,
    Cluster,
    Chain,
}

/// Edge lengths of built trees.
///
/// `LevelHalving` gives an edge entering level `l` the length `2^-l`; for
/// chains it means the gap between consecutive projected values, so that
/// the chain distance is the 1-D Wasserstein distance along the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    Unit,
    LevelHalving,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub method: BuildMethod,
    pub depth: usize,
    pub branching: usize,
    pub weight_scheme: WeightScheme,
    pub seed: u64,
    /// Direction for chains; drawn uniformly from the unit sphere when absent.
    pub projection: Option<Vec<f64>>,
    /// Randomly shift the quadtree root cell.
    pub random_shift: bool,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            method: BuildMethod::Cluster,
            depth: 6,
            branching: 5,
            weight_scheme: WeightScheme::Unit,
            seed: 0,
            projection: None,
            random_shift: true,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.method == BuildMethod::Cluster && self.branching < 2 {
            return Err(Error::Config("branching must be at least 2".into()));
        }
        Ok(())
    }

    fn edge_weight(&self, level: usize) -> f64 {
        match self.weight_scheme {
            WeightScheme::Unit => 1.0,
            WeightScheme::LevelHalving => 0.5f64.powi(level as i32),
        }
    }
}

/// A tree whose `k`-th leaf stands for point `leaf_points[k]` of the cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedTree {
    pub tree: Tree,
    pub leaf_points: Vec<usize>,
}

impl EmbeddedTree {
    pub fn new(tree: Tree, leaf_points: Vec<usize>) -> Result<Self> {
        if tree.n_leaf() != leaf_points.len() {
            return Err(Error::Dimension { expected: tree.n_leaf(), got: leaf_points.len() });
        }
        Ok(Self { tree, leaf_points })
    }

    /// Checks that the leaves cover `0..n_points` exactly once.
    pub fn check_coverage(&self, n_points: usize) -> Result<()> {
        if self.leaf_points.len() != n_points {
            return Err(Error::Support(format!(
                "tree has {} leaves for {n_points} supports",
                self.leaf_points.len()
            )));
        }
        let mut seen = vec![false; n_points];
        for &p in &self.leaf_points {
            if p >= n_points || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Support(format!("support {p} missing or repeated among leaves")));
            }
        }
        Ok(())
    }
}

/// Node arena used while partitioning; converted to canonical order at the end.
#[derive(Default)]
struct Arena {
    parent: Vec<Option<usize>>,
    weight: Vec<f64>,
    point: Vec<Option<usize>>,
}

impl Arena {
    fn with_root() -> Self {
        let mut a = Self::default();
        a.push(None, 0.0, None);
        a
    }

    fn push(&mut self, parent: Option<usize>, weight: f64, point: Option<usize>) -> usize {
        self.parent.push(parent);
        self.weight.push(weight);
        self.point.push(point);
        self.parent.len() - 1
    }

    /// Breadth-first renumbering with internal nodes first, then compaction.
    fn finish(self) -> EmbeddedTree {
        let n = self.parent.len();
        let mut children = vec![Vec::new(); n];
        for (v, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(v);
            }
        }
        let mut bfs = Vec::with_capacity(n);
        bfs.push(0);
        let mut head = 0;
        while head < bfs.len() {
            let v = bfs[head];
            head += 1;
            bfs.extend_from_slice(&children[v]);
        }
        let (internal, leaves): (Vec<usize>, Vec<usize>) =
            bfs.into_iter().partition(|&v| self.point[v].is_none());

        let mut new_index = vec![0; n];
        for (i, &v) in internal.iter().chain(&leaves).enumerate() {
            new_index[v] = i;
        }
        let order: Vec<usize> = internal.iter().chain(&leaves).copied().collect();
        let parent = order.iter().map(|&v| self.parent[v].map(|p| new_index[p])).collect();
        let weight = order.iter().map(|&v| self.weight[v]).collect();
        let leaf_points = leaves.iter().map(|&v| self.point[v].unwrap()).collect();

        let tree = Tree::new(parent, weight, internal.len()).expect("builders emit valid trees");
        EmbeddedTree { tree: compact_tree(&tree), leaf_points }
    }
}

fn all_identical(pc: &PointCloud, pts: &[usize]) -> bool {
    let first = pc.point(pts[0]);
    pts.iter().all(|&p| pc.point(p) == first)
}

pub fn build_quadtree(pc: &PointCloud, cfg: &BuildConfig) -> Result<EmbeddedTree> {
    cfg.validate()?;
    let d = pc.dim();
    if d > 20 {
        return Err(Error::Config(format!("quadtree supports at most 20 dimensions, got {d}")));
    }
    let mut lo = pc.point(0).to_vec();
    let mut hi = lo.clone();
    for i in 1..pc.len() {
        for (k, &x) in pc.point(i).iter().enumerate() {
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    let mut width = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max);
    if width == 0.0 {
        width = 1.0;
    }
    let (origin, side) = if cfg.random_shift {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let origin = lo.iter().map(|&l| l - rng.random::<f64>() * width).collect();
        (origin, 2.0 * width)
    } else {
        (lo, width)
    };

    let mut arena = Arena::with_root();
    let all: Vec<usize> = (0..pc.len()).collect();
    quad_split(pc, cfg, &mut arena, 0, origin, side, all, 0);
    Ok(arena.finish())
}

#[allow(clippy::too_many_arguments)]
fn quad_split(
    pc: &PointCloud,
    cfg: &BuildConfig,
    arena: &mut Arena,
    node: usize,
    origin: Vec<f64>,
    side: f64,
    pts: Vec<usize>,
    level: usize,
) {
    if level + 2 > cfg.depth || pts.len() <= 1 || all_identical(pc, &pts) {
        for p in pts {
            debug_assert!(pc
                .point(p)
                .iter()
                .zip(&origin)
                .all(|(&x, &o)| x >= o && x <= o + side));
            arena.push(Some(node), cfg.edge_weight(level + 1), Some(p));
        }
        return;
    }
    let half = side / 2.0;
    let mut cells: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for p in pts {
        let key = pc
            .point(p)
            .iter()
            .zip(&origin)
            .enumerate()
            .fold(0u32, |key, (k, (&x, &o))| if x >= o + half { key | (1 << k) } else { key });
        cells.entry(key).or_default().push(p);
    }
    for (key, members) in cells {
        let child_origin = origin
            .iter()
            .enumerate()
            .map(|(k, &o)| if key & (1 << k) != 0 { o + half } else { o })
            .collect();
        let child = arena.push(Some(node), cfg.edge_weight(level + 1), None);
        quad_split(pc, cfg, arena, child, child_origin, half, members, level + 1);
    }
}

pub fn build_cluster_tree(pc: &PointCloud, cfg: &BuildConfig) -> Result<EmbeddedTree> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut arena = Arena::with_root();
    cluster_split(pc, cfg, &mut rng, &mut arena, 0, (0..pc.len()).collect(), 0);
    Ok(arena.finish())
}

/// Farthest-point traversal over `pts`: returns up to `k` distinct centers.
fn farthest_point_centers(pc: &PointCloud, pts: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let first = pts[rng.random_range(0..pts.len())];
    let mut centers = vec![first];
    let mut dist: Vec<f64> = pts.iter().map(|&p| pc.sq_dist(p, first)).collect();
    while centers.len() < k {
        let (best, &far) = dist
            .iter()
            .enumerate()
            .fold((0, &dist[0]), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if far == 0.0 {
            break;
        }
        let c = pts[best];
        centers.push(c);
        for (d, &p) in dist.iter_mut().zip(pts) {
            *d = d.min(pc.sq_dist(p, c));
        }
    }
    centers
}

fn cluster_split(
    pc: &PointCloud,
    cfg: &BuildConfig,
    rng: &mut ChaCha8Rng,
    arena: &mut Arena,
    node: usize,
    pts: Vec<usize>,
    level: usize,
) {
    let stop = level + 2 > cfg.depth || pts.len() <= 1;
    let centers = if stop { Vec::new() } else { farthest_point_centers(pc, &pts, cfg.branching, rng) };
    if centers.len() <= 1 {
        for p in pts {
            arena.push(Some(node), cfg.edge_weight(level + 1), Some(p));
        }
        return;
    }
    let mut groups = vec![Vec::new(); centers.len()];
    for p in pts {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (ci, &c) in centers.iter().enumerate() {
            let d = pc.sq_dist(p, c);
            if d < best_d {
                best = ci;
                best_d = d;
            }
        }
        groups[best].push(p);
    }
    for members in groups {
        let child = arena.push(Some(node), cfg.edge_weight(level + 1), None);
        cluster_split(pc, cfg, rng, arena, child, members, level + 1);
    }
}

/// Projects the cloud onto the configured (or a random unit) direction and
/// returns point indices sorted by projected value along with the values.
pub fn sorted_projection(pc: &PointCloud, cfg: &BuildConfig) -> Result<(Vec<usize>, Vec<f64>)> {
    let dir = match &cfg.projection {
        Some(p) => {
            if p.len() != pc.dim() {
                return Err(Error::Dimension { expected: pc.dim(), got: p.len() });
            }
            p.clone()
        }
        None => random_direction(pc.dim(), cfg.seed),
    };
    let values: Vec<f64> =
        (0..pc.len()).map(|i| pc.point(i).iter().zip(&dir).map(|(x, u)| x * u).sum()).collect();
    let mut order: Vec<usize> = (0..pc.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let sorted = order.iter().map(|&i| values[i]).collect();
    Ok((order, sorted))
}

pub fn random_direction(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn build_chain(pc: &PointCloud, cfg: &BuildConfig) -> Result<EmbeddedTree> {
    cfg.validate()?;
    let (order, values) = sorted_projection(pc, cfg)?;
    let weight = std::iter::once(0.0)
        .chain(values.windows(2).map(|w| match cfg.weight_scheme {
            WeightScheme::Unit => 1.0,
            WeightScheme::LevelHalving => w[1] - w[0],
        }))
        .collect();
    EmbeddedTree::new(Tree::chain(weight)?, order)
}

pub fn build_tree(pc: &PointCloud, cfg: &BuildConfig) -> Result<EmbeddedTree> {
    match cfg.method {
        BuildMethod::Quadtree => build_quadtree(pc, cfg),
        BuildMethod::Cluster => build_cluster_tree(pc, cfg),
        BuildMethod::Chain => build_chain(pc, cfg),
    }
}

/// `count` trees built with seeds `seed, seed + 1, ...`.
pub fn sample_ensemble(pc: &PointCloud, cfg: &BuildConfig, count: usize) -> Result<Vec<EmbeddedTree>> {
    if count == 0 {
        return Err(Error::Config("ensemble needs at least one tree".into()));
    }
    (0..count as u64)
        .into_par_iter()
        .map(|t| {
            let cfg = BuildConfig { seed: cfg.seed.wrapping_add(t), ..cfg.clone() };
            build_tree(pc, &cfg)
        })
        .collect()
}
