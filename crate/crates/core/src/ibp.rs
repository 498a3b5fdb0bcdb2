//! Entropic fixed-support Wasserstein barycenters by iterative Bregman
//! projections, plus the Sinkhorn loss used to compare candidate barycenters.
//!
//! Scalings are kept as logarithms and applied through a max-shift, so only
//! the Gibbs kernel itself is stored in linear form. Kernel entries are
//! clamped from below at `KERNEL_FLOOR`, which keeps every kernel-vector
//! product strictly positive.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::numeric::compensated_sum;
use crate::points::PointCloud;

pub const KERNEL_FLOOR: f64 = 1e-300;

/// Dense symmetric ground-cost matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        check_len(n * n, data.len())?;
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::Config(format!("cost diagonal nonzero at {i}")));
            }
            for j in 0..n {
                let c = data[i * n + j];
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::NonFinite(i));
                }
                if c != data[j * n + i] {
                    return Err(Error::Config(format!("cost not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Divides every entry by the largest one (no-op for an all-zero matrix).
    pub fn normalized_by_max(mut self) -> Self {
        let m = self.max();
        if m > 0.0 {
            self.data.iter_mut().for_each(|c| *c /= m);
        }
        self
    }
}

/// Pairwise Euclidean distances raised to `exponent`.
pub fn build_cost_matrix(pc: &PointCloud, exponent: f64) -> Result<CostMatrix> {
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::Config(format!("cost exponent must be positive, got {exponent}")));
    }
    let n = pc.len();
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, c) in row.iter_mut().enumerate() {
            if i != j {
                let d = pc.sq_dist(i, j).sqrt();
                *c = if exponent == 1.0 { d } else { d.powf(exponent) };
            }
        }
    });
    Ok(CostMatrix { n, data })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbpConfig {
    pub reg: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for IbpConfig {
    fn default() -> Self {
        Self { reg: 0.01, max_iters: 1000, tol: 1e-4 }
    }
}

impl IbpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reg > 0.0 && self.reg.is_finite()) {
            return Err(Error::Config(format!("reg must be positive, got {}", self.reg)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// `K = max(exp(-C / reg), KERNEL_FLOOR)`, symmetric because `C` is.
#[derive(Debug, Clone)]
pub struct GibbsKernel {
    n: usize,
    reg: f64,
    data: Vec<f64>,
    log_floor: f64,
}

impl GibbsKernel {
    pub fn new(c: &CostMatrix, reg: f64) -> Self {
        let log_floor = KERNEL_FLOOR.ln();
        let data = c.data.par_iter().map(|&x| (-x / reg).max(log_floor).exp().max(KERNEL_FLOOR)).collect();
        Self { n: c.n, reg, data, log_floor }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn log_entry(&self, c: f64) -> f64 {
        (-c / self.reg).max(self.log_floor)
    }

    /// `out = log(K exp(log_x))` via a max shift.
    pub fn log_apply(&self, log_x: &[f64], out: &mut [f64]) -> Result<()> {
        let shift = log_x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            out.fill(f64::NEG_INFINITY);
            return Ok(());
        }
        let scaled: Vec<f64> = log_x.iter().map(|&l| (l - shift).exp()).collect();
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.data[j * self.n..(j + 1) * self.n];
            let s: f64 = row.iter().zip(&scaled).map(|(k, x)| k * x).sum();
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Underflow { row: j });
            }
            *o = shift + s.ln();
        }
        Ok(())
    }
}

fn log_vec(a: &[f64]) -> Vec<f64> {
    a.iter().map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY }).collect()
}

fn check_inputs(n: usize, inputs: &[Vec<f64>]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Empty("input distributions"));
    }
    for b in inputs {
        check_len(n, b.len())?;
        if let Some(i) = b.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite(i));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct IbpResult {
    pub barycenter: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// L1 change of the barycenter over the last sweep.
    pub last_change: f64,
    pub log_u: Vec<Vec<f64>>,
    pub log_v: Vec<Vec<f64>>,
    pub loop_time: Duration,
}

impl IbpResult {
    /// L1 gap between the column marginal of plan `k` and input `k`.
    pub fn column_marginal_error(&self, kernel: &GibbsKernel, inputs: &[Vec<f64>], k: usize) -> Result<f64> {
        let mut kt_u = vec![0.0; kernel.len()];
        kernel.log_apply(&self.log_u[k], &mut kt_u)?;
        Ok(compensated_sum(
            self.log_v[k].iter().zip(&kt_u).zip(&inputs[k]).map(|((lv, lk), b)| ((lv + lk).exp() - b).abs()),
        ))
    }

    /// L1 gap between the row marginal of plan `k` and the barycenter.
    pub fn row_marginal_error(&self, kernel: &GibbsKernel, k: usize) -> Result<f64> {
        let mut k_v = vec![0.0; kernel.len()];
        kernel.log_apply(&self.log_v[k], &mut k_v)?;
        Ok(compensated_sum(
            self.log_u[k].iter().zip(&k_v).zip(&self.barycenter).map(|((lu, lk), a)| ((lu + lk).exp() - a).abs()),
        ))
    }
}

/// Iterative Bregman projections with uniform input weights.
///
/// Each sweep fits every plan's column marginal to its input, takes the
/// geometric mean of the row marginals as the new barycenter, and rescales
/// the rows onto it. Stops once the barycenter moved less than `tol` in L1
/// over the last sweep and every column marginal is within `tol` of its
/// input.
pub fn ibp_barycenter(c: &CostMatrix, inputs: &[Vec<f64>], cfg: &IbpConfig) -> Result<IbpResult> {
    cfg.validate()?;
    check_inputs(c.len(), inputs)?;
    let kernel = GibbsKernel::new(c, cfg.reg);
    ibp_with_kernel(&kernel, inputs, cfg)
}

pub fn ibp_with_kernel(kernel: &GibbsKernel, inputs: &[Vec<f64>], cfg: &IbpConfig) -> Result<IbpResult> {
    cfg.validate()?;
    let n = kernel.len();
    check_inputs(n, inputs)?;
    let weight = 1.0 / inputs.len() as f64;
    let log_b: Vec<Vec<f64>> = inputs.iter().map(|b| log_vec(b)).collect();
    let mut log_u = vec![vec![0.0; n]; inputs.len()];
    let mut log_v = vec![vec![0.0; n]; inputs.len()];
    let mut log_m = vec![vec![0.0; n]; inputs.len()];
    let mut barycenter = vec![0.0; n];
    let mut prev: Option<Vec<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_change = f64::INFINITY;

    let start = Instant::now();
    for _ in 0..cfg.max_iters {
        iterations += 1;
        let column_errors = log_u
            .par_iter()
            .zip(log_v.par_iter_mut())
            .zip(log_m.par_iter_mut())
            .zip(log_b.par_iter().zip(inputs.par_iter()))
            .map(|(((lu, lv), lm), (lb, b))| -> Result<f64> {
                let mut tmp = vec![0.0; n];
                kernel.log_apply(lu, &mut tmp)?;
                let err = compensated_sum(lv.iter().zip(&tmp).zip(b).map(|((v, k), b)| ((v + k).exp() - b).abs()));
                for ((v, b), k) in lv.iter_mut().zip(lb).zip(&tmp) {
                    *v = if *b == f64::NEG_INFINITY { f64::NEG_INFINITY } else { b - k };
                }
                kernel.log_apply(lv, &mut tmp)?;
                for ((m, u), k) in lm.iter_mut().zip(lu).zip(&tmp) {
                    *m = u + k;
                }
                Ok(err)
            })
            .collect::<Result<Vec<f64>>>()?;
        // The plans entering this sweep already fit their inputs and the
        // barycenter has settled: keep the refreshed column scalings and stop.
        if last_change < cfg.tol && column_errors.iter().all(|&e| e < cfg.tol) {
            converged = true;
            break;
        }

        let log_a: Vec<f64> =
            (0..n).map(|i| log_m.iter().map(|m| weight * m[i]).sum::<f64>()).collect();
        log_u.par_iter_mut().zip(log_m.par_iter()).for_each(|(lu, lm)| {
            for ((u, m), a) in lu.iter_mut().zip(lm).zip(&log_a) {
                *u += a - m;
            }
        });

        let a: Vec<f64> = log_a.iter().map(|l| l.exp()).collect();
        if let Some(i) = a.iter().position(|x| !x.is_finite()) {
            return Err(Error::Underflow { row: i });
        }
        barycenter.copy_from_slice(&a);
        if let Some(p) = &prev {
            last_change = compensated_sum(a.iter().zip(p).map(|(x, y)| (x - y).abs()));
        }
        prev = Some(a);
    }
    let loop_time = start.elapsed();

    let total: f64 = barycenter.iter().sum();
    barycenter.iter_mut().for_each(|x| *x /= total);
    Ok(IbpResult { barycenter, iterations, converged, last_change, log_u, log_v, loop_time })
}

/// Entropic transport cost `<P, C>` between `a` and `b` at the Sinkhorn
/// scalings, stopping when the row marginal is within `tol` in L1.
pub fn sinkhorn_cost(c: &CostMatrix, kernel: &GibbsKernel, a: &[f64], b: &[f64], cfg: &IbpConfig) -> Result<f64> {
    let n = kernel.len();
    check_len(n, a.len())?;
    check_len(n, b.len())?;
    let log_a = log_vec(a);
    let log_b = log_vec(b);
    let mut lu = vec![0.0; n];
    let mut lv = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let sub = |target: &[f64], denom: &[f64], out: &mut [f64]| {
        for ((o, t), d) in out.iter_mut().zip(target).zip(denom) {
            *o = if *t == f64::NEG_INFINITY { f64::NEG_INFINITY } else { t - d };
        }
    };
    for it in 0..cfg.max_iters {
        kernel.log_apply(&lv, &mut tmp)?;
        if it % 10 == 9 {
            let err = compensated_sum(lu.iter().zip(&tmp).zip(a).map(|((u, k), x)| ((u + k).exp() - x).abs()));
            if err < cfg.tol {
                break;
            }
        }
        sub(&log_a, &tmp, &mut lu);
        kernel.log_apply(&lu, &mut tmp)?;
        sub(&log_b, &tmp, &mut lv);
    }
    let terms = (0..n).into_par_iter().map(|i| {
        if lu[i] == f64::NEG_INFINITY {
            return 0.0;
        }
        let row = c.row(i);
        compensated_sum((0..n).filter(|&j| lv[j] > f64::NEG_INFINITY).map(|j| {
            (lu[i] + kernel.log_entry(row[j]) + lv[j]).exp() * row[j]
        }))
    });
    Ok(compensated_sum(terms.collect::<Vec<_>>()))
}

/// Average Sinkhorn cost of `a` against every input.
pub fn evaluate_loss(c: &CostMatrix, inputs: &[Vec<f64>], a: &[f64], cfg: &IbpConfig) -> Result<f64> {
    cfg.validate()?;
    check_inputs(c.len(), inputs)?;
    let kernel = GibbsKernel::new(c, cfg.reg);
    evaluate_loss_with_kernel(c, &kernel, inputs, a, cfg)
}

pub fn evaluate_loss_with_kernel(
    c: &CostMatrix,
    kernel: &GibbsKernel,
    inputs: &[Vec<f64>],
    a: &[f64],
    cfg: &IbpConfig,
) -> Result<f64> {
    let costs = inputs
        .par_iter()
        .map(|b| sinkhorn_cost(c, kernel, a, b, cfg))
        .collect::<Result<Vec<f64>>>()?;
    Ok(compensated_sum(costs) / inputs.len() as f64)
}

/// Zeroes entries below `eps` and rescales the rest to unit mass.
pub fn threshold_and_renormalize(a: &[f64], eps: f64) -> Result<Vec<f64>> {
    if !(eps >= 0.0) {
        return Err(Error::Config(format!("threshold must be nonnegative, got {eps}")));
    }
    let kept: Vec<f64> = a.iter().map(|&x| if x < eps { 0.0 } else { x }).collect();
    let total: f64 = kept.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllBelowThreshold(eps));
    }
    Ok(kept.into_iter().map(|x| x / total).collect())
}
