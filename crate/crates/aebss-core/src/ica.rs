//! Frequency-domain independent component analysis for convolutive mixtures.
//!
//! The record is framed into blocks, each block is transformed to the
//! frequency domain, and every non-redundant bin learns its own complex
//! unmixing matrix by natural-gradient updates with a saturating
//! nonlinearity. After the pass loop the per-bin matrices are permutation-
//! aligned (optional), normalized, converted back to time-domain FIR
//! filters, and inverted to recover the mixing filters whose tap peaks
//! carry the propagation delays.

use crate::error::{Error, Result};
use crate::fft::{num_bins, RealDft};
use crate::fir::{apply_filter_matrix, FilterMatrix, FilterRole, FirFilter};
use crate::linalg;
use crate::signal::{block_spectra, MultichannelRecord};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Per-bin condition-number ceiling for ridge-free inversion.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Decision margin for the permutation-alignment swap test. Near-identical
/// envelope correlations carry no pairing information; requiring the crossed
/// pairing to win by this much keeps uninformative bins in place.
const ALIGN_MARGIN: f64 = 0.1;

/// Per-frequency-bin complex matrices: the spectral form of a filter matrix.
///
/// `bins[k]` is the row-major `n x n` matrix for bin `k`; there are
/// `fft_size / 2 + 1` non-redundant bins. The same container holds unmixing
/// state, learning deltas, and inverted (mixing) spectra. The pipeline
/// operations work on `n >= 2` systems; the container itself also accepts
/// `n == 1` so that single-channel update arithmetic can be exercised
/// directly.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralUnmixing {
    pub n: usize,
    pub fft_size: usize,
    pub bins: Vec<Vec<Complex64>>,
}

impl SpectralUnmixing {
    pub fn new(n: usize, fft_size: usize, bins: Vec<Vec<Complex64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("channel count must be at least 1".into()));
        }
        if !fft_size.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "fft_size must be a power of two, got {fft_size}"
            )));
        }
        if bins.len() != num_bins(fft_size) {
            return Err(Error::Dimension(format!(
                "expected {} bins for fft_size {fft_size}, got {}",
                num_bins(fft_size),
                bins.len()
            )));
        }
        for (k, b) in bins.iter().enumerate() {
            if b.len() != n * n {
                return Err(Error::Dimension(format!(
                    "bin {k} holds {} entries, expected {}",
                    b.len(),
                    n * n
                )));
            }
            if b.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::Parameter(format!("bin {k} contains non-finite entries")));
            }
        }
        Ok(Self { n, fft_size, bins })
    }

    /// All-zero matrices of the same shape; the initial momentum state.
    pub fn zeros(n: usize, fft_size: usize) -> Self {
        Self {
            n,
            fft_size,
            bins: vec![vec![Complex64::new(0.0, 0.0); n * n]; num_bins(fft_size)],
        }
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    /// Apply bin `k`'s matrix to a per-channel spectral vector.
    pub fn apply_bin(&self, k: usize, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let wk = &self.bins[k];
        (0..n)
            .map(|i| (0..n).map(|j| wk[i * n + j] * x[j]).sum())
            .collect()
    }
}

/// Identity unmixing at every bin: the deterministic starting point of the
/// learning loop ("no unmixing yet"). Its time-domain equivalent is a unit
/// impulse at tap 0 on the diagonal.
pub fn initialize_unmixing(n: usize, fft_size: usize) -> Result<SpectralUnmixing> {
    if n < 2 {
        return Err(Error::Dimension(format!(
            "separation needs at least 2 channels, got {n}"
        )));
    }
    if !fft_size.is_power_of_two() {
        return Err(Error::Parameter(format!(
            "fft_size must be a power of two, got {fft_size}"
        )));
    }
    Ok(SpectralUnmixing {
        n,
        fft_size,
        bins: vec![linalg::identity(n); num_bins(fft_size)],
    })
}

/// Learning configuration.
///
/// `convergence_tol` is a floor on the per-pass mean update norm, not the
/// expected stopping mode: with single-block outer products the norm
/// plateaus well above tiny tolerances, so `max_passes` is what usually
/// ends the loop. The per-pass norms in [`IcaResult::pass_norms`] make the
/// decay visible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcaConfig {
    /// Transform size and unmixing filter length; power of two.
    pub fft_size: usize,
    /// Block advance in samples; defaults to `fft_size` (non-overlapping).
    pub hop: usize,
    /// Natural-gradient step size (alpha). Zero is accepted and leaves the
    /// filters at their initialization, which is useful for dry runs.
    pub learning_rate: f64,
    /// Momentum coefficient (eta) in `[0, 1)`: each applied step is
    /// `alpha * gradient + eta * previous_step`.
    pub momentum: f64,
    /// Upper bound on passes through the data.
    pub max_passes: usize,
    /// Stop once the mean Frobenius norm of `alpha * gradient` over a full
    /// pass drops below this.
    pub convergence_tol: f64,
    /// Reserved for stochastic variants; the current algorithm is fully
    /// deterministic (identity initialization, no sampling). Echoed in
    /// reports so configurations stay comparable.
    pub seed: u64,
    /// Swap per-bin source ordering so envelopes stay consistent across
    /// bins. Disable to run the plain per-bin algorithm.
    pub align_permutations: bool,
    /// Relative diagonal loading used when inverting the learned unmixing:
    /// each bin's loading is `ridge * mean |W(k)|^2`. Zero disables
    /// regularization and enables the condition check instead.
    pub ridge: f64,
}

impl Default for IcaConfig {
    fn default() -> Self {
        Self {
            fft_size: 1024,
            hop: 1024,
            learning_rate: 1e-3,
            momentum: 0.5,
            max_passes: 200,
            convergence_tol: 1e-5,
            seed: 0,
            align_permutations: true,
            ridge: 1e-8,
        }
    }
}

impl IcaConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return Err(Error::Parameter(format!(
                "fft_size must be a power of two >= 2, got {}",
                self.fft_size
            )));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(Error::Parameter(format!(
                "hop must satisfy 0 < hop <= fft_size, got {}",
                self.hop
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Parameter(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !self.momentum.is_finite() || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Parameter(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::Parameter("max_passes must be at least 1".into()));
        }
        if !self.convergence_tol.is_finite() || self.convergence_tol <= 0.0 {
            return Err(Error::Parameter(format!(
                "convergence_tol must be finite and positive, got {}",
                self.convergence_tol
            )));
        }
        if !self.ridge.is_finite() || self.ridge < 0.0 {
            return Err(Error::Parameter(format!(
                "ridge must be finite and >= 0, got {}",
                self.ridge
            )));
        }
        Ok(())
    }
}

/// Everything the learning loop produces.
#[derive(Debug, Clone)]
pub struct IcaResult {
    /// Learned separator as time-domain FIR filters (`zero_delay_tap` 0).
    pub unmixing_time: FilterMatrix,
    /// Per-bin inverse of the separator: the recovered mixing filters,
    /// centred so tap `fft_size / 2` is zero delay.
    pub mixing_time: FilterMatrix,
    /// The separator applied to the mean-removed input.
    pub sources_estimated: MultichannelRecord,
    /// Passes actually executed.
    pub passes_used: usize,
    /// Mean update norm of the final pass.
    pub final_update_norm: f64,
    /// Mean update norm of every pass, for convergence diagnostics.
    pub pass_norms: Vec<f64>,
    /// Bins whose source ordering the alignment step swapped.
    pub bins_realigned: usize,
}

/// One natural-gradient step on a single block spectrum.
///
/// Per bin `k`, independently: `u = W x`, `y = tanh(Re u) + i tanh(Im u)`,
/// `G = (I - y u^H) W`, and the applied step is `alpha * G + eta * d_prev`.
/// `x_block` is indexed `[channel][bin]`. `delta` carries the previously
/// applied step in and is overwritten with the step applied here — the
/// momentum state threaded through consecutive calls; pass zeros first.
/// Returns the mean over bins of the Frobenius norm of `alpha * G`, the
/// statistic the convergence test watches.
pub fn ica_block_update(
    w: &mut SpectralUnmixing,
    x_block: &[Vec<Complex64>],
    alpha: f64,
    eta: f64,
    delta: &mut SpectralUnmixing,
) -> Result<f64> {
    let n = w.n;
    let kb = w.bins.len();
    if x_block.len() != n {
        return Err(Error::Dimension(format!(
            "block carries {} channels, unmixing expects {n}",
            x_block.len()
        )));
    }
    if x_block.iter().any(|ch| ch.len() != kb) {
        return Err(Error::Dimension(format!(
            "every channel spectrum must hold {kb} bins"
        )));
    }
    if delta.n != n || delta.bins.len() != kb {
        return Err(Error::Dimension(
            "momentum state shape does not match the unmixing".into(),
        ));
    }

    let mut u = vec![Complex64::new(0.0, 0.0); n];
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    let mut g = vec![Complex64::new(0.0, 0.0); n * n];
    let mut norm_acc = 0.0;

    for k in 0..kb {
        let wk = &mut w.bins[k];
        let dk = &mut delta.bins[k];

        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += wk[i * n + j] * x_block[j][k];
            }
            u[i] = acc;
        }
        for i in 0..n {
            y[i] = Complex64::new(u[i].re.tanh(), u[i].im.tanh());
        }
        for i in 0..n {
            for p in 0..n {
                let id = if i == p { 1.0 } else { 0.0 };
                m[i * n + p] = Complex64::new(id, 0.0) - y[i] * u[p].conj();
            }
        }
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for p in 0..n {
                    acc += m[i * n + p] * wk[p * n + j];
                }
                g[i * n + j] = acc;
            }
        }

        let frob = g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        norm_acc += alpha * frob;

        let mut finite = frob.is_finite();
        for idx in 0..n * n {
            let step = alpha * g[idx] + eta * dk[idx];
            wk[idx] += step;
            dk[idx] = step;
            finite &= wk[idx].re.is_finite() && wk[idx].im.is_finite();
        }
        if !finite {
            return Err(Error::Divergence { bin: k, pass: 0 });
        }
    }
    Ok(norm_acc / kb as f64)
}

/// The complete off-line separation: mean removal, identity initialization,
/// repeated passes of per-block per-bin updates until `max_passes` or the
/// convergence floor, optional permutation alignment, normalization,
/// conversion to time-domain filters, inversion to mixing filters, and
/// source estimation.
pub fn run_ica(record: &MultichannelRecord, config: &IcaConfig) -> Result<IcaResult> {
    config.validate()?;
    let n = record.n_channels();
    if record.len() < config.fft_size {
        return Err(Error::Parameter(format!(
            "record length {} is shorter than one fft_size block ({}); no full block to learn from",
            record.len(),
            config.fft_size
        )));
    }
    if config.learning_rate == 0.0 {
        log::warn!("learning_rate is 0: the unmixing filters will stay at initialization");
    }

    let centered = MultichannelRecord {
        sample_rate: record.sample_rate,
        channels: record
            .channels
            .iter()
            .map(|ch| {
                let mean = ch.iter().sum::<f64>() / ch.len() as f64;
                ch.iter().map(|v| v - mean).collect()
            })
            .collect(),
    };

    let mut w = initialize_unmixing(n, config.fft_size)?;
    let spectra = block_spectra(&centered, config.fft_size, config.hop)?;
    let mut delta = SpectralUnmixing::zeros(n, config.fft_size);

    let mut pass_norms = Vec::new();
    for pass in 0..config.max_passes {
        let mut acc = 0.0;
        for block in &spectra {
            acc += ica_block_update(
                &mut w,
                block,
                config.learning_rate,
                config.momentum,
                &mut delta,
            )
            .map_err(|e| match e {
                Error::Divergence { bin, .. } => Error::Divergence { bin, pass: pass + 1 },
                other => other,
            })?;
        }
        let norm = acc / spectra.len() as f64;
        pass_norms.push(norm);
        log::debug!("pass {}: mean update norm {norm:.3e}", pass + 1);
        if norm < config.convergence_tol {
            break;
        }
    }

    let bins_realigned = if config.align_permutations {
        if n == 2 {
            let swapped = align_permutations(&mut w, &spectra);
            log::debug!("permutation alignment swapped {swapped} of {} bins", w.num_bins());
            swapped
        } else {
            log::warn!("permutation alignment is implemented for 2 channels; skipping for n = {n}");
            0
        }
    } else {
        0
    };

    let w = normalize_unmixing(&w)?;
    let unmixing_time = unmixing_to_time(&w)?;
    let sources_estimated = apply_filter_matrix(&unmixing_time, &centered)?;
    let mixing_time = invert_to_mixing(&w, config.ridge)?;

    let final_update_norm = *pass_norms.last().expect("at least one pass always runs");
    Ok(IcaResult {
        unmixing_time,
        mixing_time,
        sources_estimated,
        passes_used: pass_norms.len(),
        final_update_norm,
        pass_norms,
        bins_realigned,
    })
}

/// Make per-bin source ordering consistent across the spectrum.
///
/// ICA solves every bin independently, so bin `k` may emit source A on row 0
/// while bin `k+1` emits it on row 1. Continuous sources share their slow
/// amplitude envelope across their whole band, which identifies the pairing:
/// walk the bins from low to high, correlate each bin's per-block envelope
/// profile against a running reference per row (reference updated as
/// `0.9 ref + 0.1 current`), and swap the bin's rows when the crossed
/// pairing correlates better by more than the margin. Returns the number of
/// swapped bins.
fn align_permutations(w: &mut SpectralUnmixing, spectra: &[Vec<Vec<Complex64>>]) -> usize {
    let n = w.n;
    debug_assert_eq!(n, 2);
    let kb = w.bins.len();
    let nb = spectra.len();
    if kb < 3 || nb < 2 {
        return 0;
    }

    // Envelope of each separated output: env[k][i][b] = |(W(k) x_b(k))_i|,
    // standardized across blocks so correlations are scale-free.
    let mut env = vec![vec![vec![0.0f64; nb]; n]; kb];
    for (b, block) in spectra.iter().enumerate() {
        for k in 0..kb {
            let wk = &w.bins[k];
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += wk[i * n + j] * block[j][k];
                }
                env[k][i][b] = acc.norm();
            }
        }
    }
    for bin_env in &mut env {
        for row in bin_env.iter_mut() {
            standardize(row);
        }
    }

    // Bin 0 is DC of mean-removed data; seed the reference from bin 1.
    let mut reference = [env[1][0].clone(), env[1][1].clone()];
    let correlation = |r: &[f64], e: &[f64]| -> f64 {
        r.iter().zip(e).map(|(a, b)| a * b).sum::<f64>() / nb as f64
    };

    let mut swaps = 0;
    for k in 2..kb {
        let c11 = correlation(&reference[0], &env[k][0]);
        let c22 = correlation(&reference[1], &env[k][1]);
        let c12 = correlation(&reference[0], &env[k][1]);
        let c21 = correlation(&reference[1], &env[k][0]);
        if (c12 + c21) - (c11 + c22) > ALIGN_MARGIN {
            let wk = &mut w.bins[k];
            wk.swap(0, 2);
            wk.swap(1, 3);
            env[k].swap(0, 1);
            swaps += 1;
        }
        for i in 0..n {
            for b in 0..nb {
                reference[i][b] = 0.9 * reference[i][b] + 0.1 * env[k][i][b];
            }
        }
    }
    swaps
}

fn standardize(v: &mut [f64]) {
    let len = v.len() as f64;
    let mean = v.iter().sum::<f64>() / len;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / len;
    let sd = var.sqrt().max(1e-30);
    for x in v.iter_mut() {
        *x = (*x - mean) / sd;
    }
}

/// Scale each output row so its largest spectral magnitude over all bins and
/// columns is 1.
///
/// The scaling is uniform per row across bins, which removes the arbitrary
/// per-source amplitude without disturbing the spectral shape or any tap
/// peak positions. Idempotent up to rounding.
pub fn normalize_unmixing(w: &SpectralUnmixing) -> Result<SpectralUnmixing> {
    let n = w.n;
    let mut out = w.clone();
    for r in 0..n {
        let mut max_mag = 0.0f64;
        for bins in &w.bins {
            for c in 0..n {
                max_mag = max_mag.max(bins[r * n + c].norm());
            }
        }
        if max_mag == 0.0 {
            return Err(Error::Degenerate(format!(
                "unmixing row {r} is zero at every bin; nothing to normalize"
            )));
        }
        let scale = 1.0 / max_mag;
        for bins in &mut out.bins {
            for c in 0..n {
                bins[r * n + c] *= scale;
            }
        }
    }
    Ok(out)
}

/// Per-bin inverse of a spectral filter matrix.
///
/// With `ridge == 0` each bin is inverted exactly and rejected if its
/// condition estimate exceeds [`CONDITION_LIMIT`]. With `ridge > 0` each bin
/// gets the regularized inverse `(W^H W + loading I)^-1 W^H`, where
/// `loading = ridge * mean |W(k)|^2` scales with the bin's own power.
pub fn invert_spectral(w: &SpectralUnmixing, ridge: f64) -> Result<SpectralUnmixing> {
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(Error::Parameter(format!(
            "ridge must be finite and >= 0, got {ridge}"
        )));
    }
    let n = w.n;
    let mut bins = Vec::with_capacity(w.bins.len());
    for (k, wk) in w.bins.iter().enumerate() {
        let inv = if ridge == 0.0 {
            let inv = linalg::inverse(n, wk).ok_or(Error::IllConditioned {
                bin: k,
                cond: f64::INFINITY,
            })?;
            let cond = linalg::condition_estimate(n, wk, &inv);
            if cond > CONDITION_LIMIT {
                return Err(Error::IllConditioned { bin: k, cond });
            }
            inv
        } else {
            let power = wk.iter().map(|c| c.norm_sqr()).sum::<f64>() / (n * n) as f64;
            linalg::ridge_inverse(n, wk, ridge * power).ok_or(Error::IllConditioned {
                bin: k,
                cond: f64::INFINITY,
            })?
        };
        bins.push(inv);
    }
    Ok(SpectralUnmixing {
        n,
        fft_size: w.fft_size,
        bins,
    })
}

/// Invert the unmixing spectrum and return time-domain mixing filters.
///
/// Each entry of the per-bin inverse is transformed to `fft_size` taps and
/// circularly shifted so tap `fft_size / 2` is zero delay: a source that
/// reaches one sensor *earlier* than the reference path then peaks below the
/// centre tap, keeping negative relative delays representable.
pub fn invert_to_mixing(w: &SpectralUnmixing, ridge: f64) -> Result<FilterMatrix> {
    let inverted = invert_spectral(w, ridge)?;
    spectral_to_filters(&inverted, FilterRole::Mixing, true)
}

/// Time-domain form of the unmixing spectrum itself (`zero_delay_tap` 0).
pub fn unmixing_to_time(w: &SpectralUnmixing) -> Result<FilterMatrix> {
    spectral_to_filters(w, FilterRole::Unmixing, false)
}

fn spectral_to_filters(
    s: &SpectralUnmixing,
    role: FilterRole,
    centered: bool,
) -> Result<FilterMatrix> {
    let n = s.n;
    let len = s.fft_size;
    let dft = RealDft::new(len);
    let mut entries = Vec::with_capacity(n * n);
    let mut entry_bins = vec![Complex64::new(0.0, 0.0); s.bins.len()];
    for i in 0..n {
        for j in 0..n {
            for (k, bin) in s.bins.iter().enumerate() {
                entry_bins[k] = bin[i * n + j];
            }
            let raw = dft.inverse(&entry_bins);
            let taps = if centered {
                (0..len).map(|p| raw[(p + len / 2) % len]).collect()
            } else {
                raw
            };
            entries.push(FirFilter::new(taps)?);
        }
    }
    FilterMatrix::new(n, role, if centered { len / 2 } else { 0 }, entries)
}
