//! Small dense helpers that must run on [`Scalar`] types, where nalgebra's
//! decompositions are unavailable.

use crate::error::{Error, Result};
use crate::expr::Scalar;

/// Inverse of a row-major `n × n` matrix by Gauss–Jordan elimination with
/// partial pivoting on the value part.
pub fn invert<T: Scalar>(a: &[T], n: usize) -> Result<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut inv: Vec<T> = (0..n * n)
        .map(|k| T::from_f64(if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| m[r * n + col].val().abs().total_cmp(&m[s * n + col].val().abs()))
            .unwrap_or(col);
        if m[pivot * n + col].val() == 0.0 {
            return Err(Error::Singular);
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
        }
        let d = m[col * n + col];
        for k in 0..n {
            m[col * n + k] = m[col * n + k] / d;
            inv[col * n + k] = inv[col * n + k] / d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f.is_exact_zero() {
                continue;
            }
            for k in 0..n {
                m[r * n + k] = m[r * n + k] - f * m[col * n + k];
                inv[r * n + k] = inv[r * n + k] - f * inv[col * n + k];
            }
        }
    }
    Ok(inv)
}
