//! Thin wrapper around `rustfft` for real-signal transforms.
//!
//! Real input of length `n` maps to the `n/2 + 1` non-redundant complex bins;
//! the inverse rebuilds the full Hermitian spectrum and keeps the real part.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Number of non-redundant spectrum bins for an `n`-point transform.
pub(crate) fn num_bins(n: usize) -> usize {
    n / 2 + 1
}

/// Forward and inverse plans for one transform size, reusable across blocks.
pub(crate) struct RealDft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl RealDft {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Spectrum of a real block: bins `0..=n/2`, unscaled (matching the usual
    /// unnormalized forward DFT convention).
    pub(crate) fn forward(&self, block: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(block.len(), self.n);
        let mut buf: Vec<Complex64> = block.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf.truncate(num_bins(self.n));
        buf
    }

    /// Real signal whose spectrum matches the given non-redundant bins.
    ///
    /// The full spectrum is reconstructed by Hermitian symmetry; any residual
    /// imaginary part of the inverse transform is discarded. Output is scaled
    /// by `1/n` so `inverse(forward(x)) == x` up to rounding.
    pub(crate) fn inverse(&self, bins: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(bins.len(), num_bins(self.n));
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        buf[..bins.len()].copy_from_slice(bins);
        for k in 1..self.n - bins.len() + 1 {
            buf[self.n - k] = bins[k].conj();
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}
