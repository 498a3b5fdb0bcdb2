//! Synthetic datasets: stroke images on a pixel grid and Gaussian blobs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::points::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// `size x size` pixel grid, images of blurred strokes.
    GridDigits,
    /// `n_points` standard normal points in `size` dimensions.
    GaussianBlobs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub kind: SynthKind,
    pub n_samples: usize,
    /// Grid side for digits, dimension for blobs.
    pub size: usize,
    /// Cloud size for blobs; ignored for digits.
    pub n_points: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { kind: SynthKind::GridDigits, n_samples: 10, size: 8, n_points: 256, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: PointCloud,
    pub distributions: Vec<Vec<f64>>,
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.n_samples == 0 || cfg.size == 0 {
        return Err(Error::Config("sample count and size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.kind {
        SynthKind::GridDigits => grid_digits(cfg, &mut rng),
        SynthKind::GaussianBlobs => gaussian_blobs(cfg, &mut rng),
    }
}

type Segment = [[f64; 2]; 2];

fn grid_digits(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let g = cfg.size;
    let side = g as f64;
    let mut rows = Vec::with_capacity(g * g);
    let mut ids = Vec::with_capacity(g * g);
    for r in 0..g {
        for c in 0..g {
            rows.push(vec![c as f64, r as f64]);
            ids.push(format!("px_{r}_{c}"));
        }
    }
    let points = PointCloud::new(rows, ids)?;

    // One shared template of three strokes; samples perturb it.
    let lo = 0.2 * (side - 1.0);
    let hi = 0.8 * (side - 1.0);
    let template: Vec<Segment> = (0..3)
        .map(|_| [[rng.random_range(lo..=hi), rng.random_range(lo..=hi)], [rng.random_range(lo..=hi), rng.random_range(lo..=hi)]])
        .collect();
    let jitter = Normal::new(0.0, 0.08 * side).expect("positive scale");
    let sigma = (0.06 * side).max(0.5);

    let distributions = (0..cfg.n_samples)
        .map(|_| {
            let strokes: Vec<Segment> = template
                .iter()
                .map(|s| s.map(|p| p.map(|x| (x + jitter.sample(rng)).clamp(0.0, side - 1.0))))
                .collect();
            let mut img: Vec<f64> = (0..g * g)
                .map(|i| {
                    let p = [(i % g) as f64, (i / g) as f64];
                    strokes.iter().map(|s| (-seg_sq_dist(p, s) / (2.0 * sigma * sigma)).exp()).sum()
                })
                .collect();
            let peak = img.iter().copied().fold(0.0, f64::max);
            img.iter_mut().for_each(|x| {
                if *x < 0.05 * peak {
                    *x = 0.0
                }
            });
            normalize(img)
        })
        .collect();
    Ok(Dataset { points, distributions })
}

fn seg_sq_dist(p: [f64; 2], s: &Segment) -> f64 {
    let [a, b] = *s;
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * d[0] - p[0], a[1] + t * d[1] - p[1]];
    q[0] * q[0] + q[1] * q[1]
}

fn gaussian_blobs(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    if cfg.n_points == 0 {
        return Err(Error::Config("point count must be at least 1".into()));
    }
    let d = cfg.size;
    let rows: Vec<Vec<f64>> =
        (0..cfg.n_points).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let points = PointCloud::with_index_ids(rows)?;
    let bandwidth2 = 2.0 * 0.5 * 0.5;
    let distributions = (0..cfg.n_samples)
        .map(|_| {
            let center: Vec<f64> = (0..d).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
            let logits: Vec<f64> = (0..points.len())
                .map(|i| {
                    let dist2: f64 = points.point(i).iter().zip(&center).map(|(x, c)| (x - c) * (x - c)).sum();
                    -dist2 / bandwidth2
                })
                .collect();
            let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            normalize(logits.iter().map(|l| (l - top).exp()).collect())
        })
        .collect();
    Ok(Dataset { points, distributions })
}

fn normalize(mut x: Vec<f64>) -> Vec<f64> {
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    x
}
