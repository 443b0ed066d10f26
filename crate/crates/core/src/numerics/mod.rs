//! Dense linear algebra, matrix norms, order statistics and seeded random
//! streams shared by the rest of the crate.

mod matrix;
mod rng;

pub use matrix::{dot, gemm, Matrix};
pub use rng::{init_stream_id, shuffle_stream_id, test_stream_id, train_stream_id, RngStream};

use crate::error::{Error, Result};

pub const SPECTRAL_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITER: usize = 10_000;

/// Largest singular value with the default tolerance and iteration budget.
pub fn spectral_norm_default(m: &Matrix) -> Result<f64> {
    spectral_norm(m, SPECTRAL_TOL, SPECTRAL_MAX_ITER)
}

/// Largest singular value by power iteration on the Gram matrix.
///
/// Iterates on the smaller of `MᵀM` and `MMᵀ` (same nonzero spectrum) from the
/// normalized all-ones vector and stops once the Rayleigh quotient moves by
/// less than `tol` relative. A zero matrix gives exactly `0`.
pub fn spectral_norm(m: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if m.is_zero() || m.rows() == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    let gram = m.gram(m.cols() <= m.rows());
    let n = gram.rows();

    let start = vec![1.0 / (n as f64).sqrt(); n];
    match power_iterate(&gram, start, tol, max_iter)? {
        Some(lambda) => Ok(lambda.max(0.0).sqrt()),
        None => {
            // The all-ones start lay in the null space; retry from a fixed
            // irrational-weight vector.
            let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract()).collect();
            normalize(&mut v);
            let lambda = power_iterate(&gram, v, tol, max_iter)?.unwrap_or(0.0);
            Ok(lambda.max(0.0).sqrt())
        }
    }
}

/// Returns `None` when the iterate collapses to zero.
fn power_iterate(gram: &Matrix, mut v: Vec<f64>, tol: f64, max_iter: usize) -> Result<Option<f64>> {
    let mut lambda = 0.0;
    for it in 0..max_iter {
        let mut w = gram.matvec(&v)?;
        let next = dot(&v, &w);
        let norm = normalize(&mut w);
        if norm == 0.0 {
            return Ok(None);
        }
        if it > 0 && (next - lambda).abs() <= tol * next.abs() {
            return Ok(Some(next));
        }
        lambda = next;
        v = w;
    }
    Err(Error::NoConvergence { iterations: max_iter, last_estimate: lambda.max(0.0).sqrt() })
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// `√(Σ M_ij²)`.
pub fn frobenius_norm(m: &Matrix) -> f64 {
    dot(m.as_slice(), m.as_slice()).sqrt()
}

/// Maximum row ℓ1 norm, `‖M‖_{1,∞}`.
pub fn row_max_l1(m: &Matrix) -> f64 {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Nearest-rank percentile: the element at index `⌈q/100·n⌉ − 1` of the
/// ascending sort.
pub fn percentile_nearest_rank(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile of an empty list".into()));
    }
    if !(q > 0.0 && q <= 100.0) {
        return Err(Error::InvalidArgument(format!("percentile {q} outside (0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // Rounded product guards against q/100·n landing a hair above an integer.
    let pos = (q / 100.0 * n as f64 * 1e9).round() / 1e9;
    let rank = (pos.ceil() as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}
