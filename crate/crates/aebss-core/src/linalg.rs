//! Small dense complex-matrix helpers for the per-bin unmixing matrices.
//!
//! Matrices are row-major `n x n` slices of `Complex64`. Sizes here are the
//! sensor count (typically 2), so a pivoted Gauss-Jordan solve is both simple
//! and fast; no external linear-algebra backend is needed.

use num_complex::Complex64;

pub(crate) fn identity(n: usize) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        m[i * n + i] = Complex64::new(1.0, 0.0);
    }
    m
}

pub(crate) fn matmul(n: usize, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Conjugate transpose.
pub(crate) fn hermitian(n: usize, a: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = a[i * n + j].conj();
        }
    }
    out
}

/// Maximum column sum of magnitudes (the induced 1-norm).
pub(crate) fn one_norm(n: usize, a: &[Complex64]) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].norm()).sum())
        .fold(0.0, f64::max)
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
///
/// Returns `None` when a pivot is exactly zero (structurally singular);
/// near-singular inputs still invert and are screened by the caller with
/// [`condition_estimate`].
pub(crate) fn inverse(n: usize, a: &[Complex64]) -> Option<Vec<Complex64>> {
    let mut m = a.to_vec();
    let mut inv = identity(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| {
                m[r * n + col]
                    .norm()
                    .partial_cmp(&m[s * n + col].norm())
                    .expect("finite magnitudes")
            })
            .expect("non-empty row range");
        if m[pivot_row * n + col].norm() == 0.0 {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                m.swap(col * n + j, pivot_row * n + j);
                inv.swap(col * n + j, pivot_row * n + j);
            }
        }
        let pivot = m[col * n + col];
        for j in 0..n {
            m[col * n + j] /= pivot;
            inv[col * n + j] /= pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r * n + col];
            if factor.norm() == 0.0 {
                continue;
            }
            for j in 0..n {
                let mcj = m[col * n + j];
                let icj = inv[col * n + j];
                m[r * n + j] -= factor * mcj;
                inv[r * n + j] -= factor * icj;
            }
        }
    }
    Some(inv)
}

/// 1-norm condition estimate `||A|| * ||A^-1||`.
pub(crate) fn condition_estimate(n: usize, a: &[Complex64], a_inv: &[Complex64]) -> f64 {
    one_norm(n, a) * one_norm(n, a_inv)
}

/// Ridge-regularized inverse `(A^H A + loading I)^-1 A^H`.
///
/// With `loading > 0` this is always well posed for finite `A`; it converges
/// to the plain inverse as `loading -> 0`.
pub(crate) fn ridge_inverse(n: usize, a: &[Complex64], loading: f64) -> Option<Vec<Complex64>> {
    let ah = hermitian(n, a);
    let mut gram = matmul(n, &ah, a);
    for i in 0..n {
        gram[i * n + i] += Complex64::new(loading, 0.0);
    }
    inverse(n, &gram).map(|g| matmul(n, &g, &ah))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_dev_from_identity(n: usize, m: &[Complex64]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                worst = worst.max((m[i * n + j] - target).norm());
            }
        }
        worst
    }

    #[test]
    fn inverse_times_original_is_identity() {
        let a = vec![c(1.0, 0.5), c(-0.3, 2.0), c(0.7, -1.1), c(2.2, 0.4)];
        let inv = inverse(2, &a).unwrap();
        assert!(max_dev_from_identity(2, &matmul(2, &inv, &a)) < 1e-12);
        assert!(max_dev_from_identity(2, &matmul(2, &a, &inv)) < 1e-12);
    }

    #[test]
    fn singular_matrix_returns_none() {
        // Second row is twice the first; the elimination is exact in
        // binary arithmetic, so the zero pivot is hit exactly.
        let a = vec![c(1.0, 0.5), c(-0.25, 2.0), c(2.0, 1.0), c(-0.5, 4.0)];
        assert!(inverse(2, &a).is_none());
    }

    #[test]
    fn near_singular_matrix_is_flagged_by_the_condition_estimate() {
        // A complex multiple leaves rounding dust instead of an exact zero
        // pivot: inversion "succeeds" but the condition estimate explodes,
        // which is the check callers gate on.
        let k = c(2.0, -1.0);
        let a = vec![c(1.0, 0.5), c(-0.3, 2.0), k * c(1.0, 0.5), k * c(-0.3, 2.0)];
        if let Some(inv) = inverse(2, &a) {
            assert!(condition_estimate(2, &a, &inv) > 1e12);
        }
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        let inv = inverse(2, &a).unwrap();
        assert!(max_dev_from_identity(2, &matmul(2, &inv, &a)) < 1e-15);
    }

    #[test]
    fn condition_of_identity_is_one() {
        let i2 = identity(2);
        assert!((condition_estimate(2, &i2, &i2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ridge_inverse_approaches_plain_inverse() {
        let a = vec![c(1.0, 0.2), c(0.1, -0.4), c(-0.2, 0.3), c(0.9, 0.0)];
        let plain = inverse(2, &a).unwrap();
        let ridged = ridge_inverse(2, &a, 1e-12).unwrap();
        for (p, r) in plain.iter().zip(&ridged) {
            assert!((p - r).norm() < 1e-9);
        }
    }

    #[test]
    fn three_by_three_round_trip() {
        let a: Vec<Complex64> = (0..9)
            .map(|k| c((k as f64 * 0.37).sin() + if k % 4 == 0 { 2.0 } else { 0.0 }, (k as f64 * 0.61).cos()))
            .collect();
        let inv = inverse(3, &a).unwrap();
        assert!(max_dev_from_identity(3, &matmul(3, &a, &inv)) < 1e-10);
    }
}
