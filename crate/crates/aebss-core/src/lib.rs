//! Blind separation of convolutive acoustic-emission mixtures, time-delay
//! estimation, and 1-D source location.
//!
//! Two sensors on a band record overlapping emissions from several
//! continuously active sources; each sensor hears every source through its
//! own propagation filter. This crate recovers what ordinary
//! cross-correlation cannot once more than one source is active:
//!
//! 1. [`signal`] — time series, multichannel records, cross-correlation,
//!    peak picking and block spectra.
//! 2. [`fir`] — FIR filter matrices and fast multichannel convolution.
//! 3. [`ica`] — frequency-domain independent component analysis: per-bin
//!    natural-gradient learning of an unmixing matrix, permutation
//!    alignment, normalization, and inversion back to mixing filters.
//! 4. [`tdoa`] — per-source inter-sensor delays, either from the
//!    cross-correlation peak (single dominant source) or from mixing-filter
//!    tap peaks (simultaneous sources).
//! 5. [`locator`] — band geometry and a Gaussian-kernel regression from
//!    delay to source coordinate over a set of prototype sources.
//! 6. [`synth`] — seeded synthetic scenarios: noise sources, geometry-
//!    derived mixing filters, mixture records and ground truth.
//! 7. [`io`] — record files, CSV exports and JSON helpers.
//!
//! Everything is deterministic: generation is seeded, learning starts from
//! the identity and draws no random numbers, and serialization has stable
//! field order.

pub mod error;
mod fft;
pub mod fir;
pub mod ica;
pub mod io;
mod linalg;
pub mod locator;
pub mod signal;
pub mod synth;
pub mod tdoa;

pub use error::{Error, Result};
