//! Euclidean projection onto the probability simplex.

use crate::error::{Error, Result};

/// Nearest point of `{a >= 0, sum(a) = 1}` to `x` in the Euclidean norm.
///
/// With `x` sorted descending, the threshold is `(s_k - 1) / k`, where
/// `s_k` sums the top `k` entries, for the largest `k` whose k-th entry
/// stays above it. That condition is monotone in `k`, so `k` is found by
/// bisection with selection instead of a full sort (expected linear time).
/// The result is divided by its sum afterwards so that solver iterates do
/// not drift off the simplex.
pub fn project_simplex(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Empty("projection of an empty vector"));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }

    // buf[..lo] holds entries known to be active, summing to `active`;
    // the answer's remaining active entries are the largest of buf[lo..hi].
    let mut buf = x.to_vec();
    let (mut lo, mut hi) = (0, buf.len());
    let mut active = 0.0;
    while lo < hi {
        let u = &mut buf[lo..hi];
        let m = u.len() / 2;
        let (upper, &mut pivot, _) = u.select_nth_unstable_by(m, |a, b| b.total_cmp(a));
        let top = active + upper.iter().sum::<f64>() + pivot;
        let k = lo + m + 1;
        if top - k as f64 * pivot < 1.0 {
            active = top;
            lo = k;
        } else {
            hi = lo + m;
        }
    }
    let theta = (active - 1.0) / lo as f64;

    let mut out: Vec<f64> = x.iter().map(|&v| (v - theta).max(0.0)).collect();
    let total: f64 = out.iter().sum();
    debug_assert!((total - 1.0).abs() < 1e-9, "projection sum drifted to {total}");
    if total != 1.0 {
        out.iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}

/// Checks nonnegativity and unit mass within `tol`.
pub fn check_distribution(a: &[f64], tol: f64) -> Result<()> {
    if a.is_empty() {
        return Err(Error::Empty("distribution"));
    }
    if let Some(i) = a.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite(i));
    }
    let total: f64 = a.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::Config(format!("distribution mass {total} is not 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_point() {
        let p = project_simplex(&[0.5, 0.5, 0.5]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_on_simplex() {
        assert_eq!(project_simplex(&[0.2, 0.8]).unwrap(), vec![0.2, 0.8]);
    }

    #[test]
    fn clips_to_vertex() {
        assert_eq!(project_simplex(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(project_simplex(&[]).is_err());
        assert_eq!(project_simplex(&[0.1, f64::NAN]), Err(Error::NonFinite(1)));
    }
}
