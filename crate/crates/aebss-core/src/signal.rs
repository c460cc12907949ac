//! Sampled-signal primitives: time series, multichannel records, correlation
//! functions, block spectra, and peak search.
//!
//! Everything downstream — separation, delay estimation, location — is built
//! on these types. All operations are pure functions of their inputs.

use crate::error::{Error, Result};
use crate::fft::{num_bins, RealDft};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Prominence ratios are reported up to this cap. A value at the cap means
/// the sequence had no competing local maximum at all (for example a single
/// clean impulse), where the ratio would otherwise be unbounded; capping
/// keeps the field representable in JSON.
pub const PROMINENCE_CAP: f64 = 1e12;

/// A uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// Samples per second; strictly positive.
    pub sample_rate: f64,
    /// Amplitudes in sensor units; finite, at least one sample.
    pub samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        if !sample_rate.is_finite() || sample_rate <= 0.0 {
            return Err(Error::Parameter(format!(
                "sample_rate must be finite and positive, got {sample_rate}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::Parameter(
                "a time series must contain at least one sample".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("sample {i} is not finite")));
        }
        Ok(Self {
            sample_rate,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Arithmetic mean of the samples.
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    /// Population variance of the samples.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.len() as f64
    }
}

/// Time-aligned signals from `n >= 2` sensors sharing one sample rate and
/// one length. Channel `i` corresponds to sensor `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultichannelRecord {
    pub sample_rate: f64,
    /// One sample vector per channel; equal lengths.
    pub channels: Vec<Vec<f64>>,
}

impl MultichannelRecord {
    pub fn new(sample_rate: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        if channels.len() < 2 {
            return Err(Error::Dimension(format!(
                "a record needs at least 2 channels, got {}",
                channels.len()
            )));
        }
        let len = channels[0].len();
        for (i, ch) in channels.iter().enumerate() {
            if ch.len() != len {
                return Err(Error::Dimension(format!(
                    "channel {i} has {} samples where channel 0 has {len}",
                    ch.len()
                )));
            }
        }
        // Validate per-channel contents through the TimeSeries rules.
        for (i, ch) in channels.iter().enumerate() {
            TimeSeries::new(sample_rate, ch.clone())
                .map_err(|e| Error::Parameter(format!("channel {i}: {e}")))?;
        }
        Ok(Self {
            sample_rate,
            channels,
        })
    }

    /// Build a record from per-sensor series, which must agree on rate and length.
    pub fn from_series(series: Vec<TimeSeries>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Dimension("no channels supplied".into()));
        }
        let rate = series[0].sample_rate;
        for (i, s) in series.iter().enumerate() {
            if s.sample_rate != rate {
                return Err(Error::Dimension(format!(
                    "channel {i} sample rate {} differs from channel 0 rate {rate}",
                    s.sample_rate
                )));
            }
        }
        Self::new(rate, series.into_iter().map(|s| s.samples).collect())
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    /// Copy channel `i` out as a standalone series.
    pub fn series(&self, i: usize) -> TimeSeries {
        TimeSeries {
            sample_rate: self.sample_rate,
            samples: self.channels[i].clone(),
        }
    }
}

/// Correlation values over a symmetric range of integer lags.
///
/// `lags` runs `-max_lag ..= +max_lag` in steps of one sample; `values[i]`
/// is the correlation at `lags[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFunction {
    pub lags: Vec<i64>,
    pub values: Vec<f64>,
}

impl CorrelationFunction {
    pub fn max_lag(&self) -> i64 {
        *self.lags.last().expect("correlation functions are never empty")
    }

    /// Value at an exact lag, if it lies within the stored range.
    pub fn value_at(&self, lag: i64) -> Option<f64> {
        let min = self.lags[0];
        if lag < min || lag > self.max_lag() {
            return None;
        }
        Some(self.values[(lag - min) as usize])
    }

    /// Highest-magnitude peak, reported with `lag_or_tap` set to the lag
    /// (not the vector index). A flat all-zero function has no peak
    /// position, so the degenerate result sits at lag 0.
    pub fn highest_peak(&self) -> PeakResult {
        let mut peak = find_highest_peak(&self.values)
            .expect("correlation values are nonempty and finite by construction");
        peak.lag_or_tap = if peak.degenerate {
            0
        } else {
            peak.lag_or_tap + self.lags[0]
        };
        peak
    }
}

/// Location and strength of the highest peak of a real sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakResult {
    /// Position of the global maximum of `|values|`. For raw sequences this
    /// is the index; helpers that search correlation functions or filter
    /// taps translate it to a lag or tap number.
    pub lag_or_tap: i64,
    /// Magnitude at the winning position.
    pub value: f64,
    /// Ratio of the highest to the second-highest local-maximum magnitude;
    /// always `>= 1`, `1.0` on exact ties, capped at [`PROMINENCE_CAP`] when
    /// no second local maximum exists.
    pub prominence: f64,
    /// True when the input was all zeros; the peak position is then
    /// meaningless and `prominence` is reported as 1.
    pub degenerate: bool,
}

/// Subtract the arithmetic mean, preserving length and sample rate.
///
/// Idempotent up to rounding: applying it twice changes nothing beyond
/// `~1e-12` of the signal scale.
pub fn remove_mean(x: &TimeSeries) -> TimeSeries {
    let m = x.mean();
    TimeSeries {
        sample_rate: x.sample_rate,
        samples: x.samples.iter().map(|v| v - m).collect(),
    }
}

/// Cross-correlation of two equal-length signals over lags
/// `-max_lag ..= +max_lag`.
///
/// The value at lag `tau` is the mean of `a[t] * b[t + tau]` over the valid
/// overlap, i.e. the raw lag product sum divided by the overlap length
/// `len - |tau|`. Autocorrelation is the `a == b` case. A positive peak lag
/// means `b` lags `a`.
pub fn cross_correlation(
    a: &TimeSeries,
    b: &TimeSeries,
    max_lag: usize,
) -> Result<CorrelationFunction> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "signal lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.sample_rate != b.sample_rate {
        return Err(Error::Dimension(format!(
            "sample rates differ: {} vs {}",
            a.sample_rate, b.sample_rate
        )));
    }
    let len = a.len();
    if max_lag == 0 || max_lag >= len {
        return Err(Error::Parameter(format!(
            "max_lag must satisfy 0 < max_lag < {len}, got {max_lag}"
        )));
    }

    let l = max_lag as i64;
    let mut lags = Vec::with_capacity(2 * max_lag + 1);
    let mut values = Vec::with_capacity(2 * max_lag + 1);
    for tau in -l..=l {
        let shift = tau.unsigned_abs() as usize;
        let overlap = len - shift;
        // For tau >= 0 the products are a[t] * b[t + tau]; for tau < 0 they
        // are a[t + |tau|] * b[t]. Both loops accumulate in ascending t so
        // that R_ab(tau) and R_ba(-tau) sum identical products in identical
        // order and agree exactly.
        let mut acc = 0.0;
        if tau >= 0 {
            for t in 0..overlap {
                acc += a.samples[t] * b.samples[t + shift];
            }
        } else {
            for t in 0..overlap {
                acc += a.samples[t + shift] * b.samples[t];
            }
        }
        lags.push(tau);
        values.push(acc / overlap as f64);
    }
    Ok(CorrelationFunction { lags, values })
}

/// Position of the global maximum of `|values|`, with a prominence ratio.
///
/// Ties break toward the smallest position. Local maxima are counted on the
/// magnitude sequence: an interior point qualifies when it exceeds its left
/// neighbour and is at least its right neighbour (so an interior plateau
/// counts once, at its first sample); an endpoint qualifies only when it
/// exceeds its single neighbour. An all-zero input is flagged degenerate.
pub fn find_highest_peak(values: &[f64]) -> Result<PeakResult> {
    if values.is_empty() {
        return Err(Error::Parameter("cannot search an empty sequence".into()));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Parameter(format!("value {i} is not finite")));
    }

    let mag: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let mut best = 0usize;
    for (i, &m) in mag.iter().enumerate() {
        if m > mag[best] {
            best = i;
        }
    }
    if mag[best] == 0.0 {
        return Ok(PeakResult {
            lag_or_tap: 0,
            value: 0.0,
            prominence: 1.0,
            degenerate: true,
        });
    }

    // Second-highest local maximum, excluding the winning position itself
    // (but not excluding equal-valued rivals, which force prominence 1).
    let n = mag.len();
    let is_local_max = |i: usize| -> bool {
        if n == 1 {
            return true;
        }
        if i == 0 {
            return mag[0] > mag[1];
        }
        if i + 1 == n {
            return mag[i] > mag[i - 1];
        }
        mag[i] > mag[i - 1] && mag[i] >= mag[i + 1]
    };
    let mut second: Option<f64> = None;
    for i in 0..n {
        if i != best && is_local_max(i) {
            second = Some(second.map_or(mag[i], |s: f64| s.max(mag[i])));
        }
    }
    let prominence = match second {
        Some(s) if s > 0.0 => (mag[best] / s).min(PROMINENCE_CAP),
        _ => PROMINENCE_CAP,
    };
    Ok(PeakResult {
        lag_or_tap: best as i64,
        value: mag[best],
        prominence,
        degenerate: false,
    })
}

/// Spectra of contiguous blocks of a record.
///
/// The record is framed into windows of `block_size` samples advancing by
/// `hop`; the trailing partial window is discarded. The result is indexed
/// `[block][channel][bin]` with `block_size / 2 + 1` non-redundant bins per
/// channel (rectangular window, unnormalized forward transform).
pub fn block_spectra(
    record: &MultichannelRecord,
    block_size: usize,
    hop: usize,
) -> Result<Vec<Vec<Vec<Complex64>>>> {
    if !block_size.is_power_of_two() {
        return Err(Error::Parameter(format!(
            "block_size must be a power of two, got {block_size}"
        )));
    }
    if hop == 0 || hop > block_size {
        return Err(Error::Parameter(format!(
            "hop must satisfy 0 < hop <= block_size ({block_size}), got {hop}"
        )));
    }
    let len = record.len();
    if len < block_size {
        return Err(Error::Parameter(format!(
            "record length {len} is shorter than one block of {block_size}"
        )));
    }

    let n_blocks = (len - block_size) / hop + 1;
    let dft = RealDft::new(block_size);
    let mut blocks = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let start = b * hop;
        let mut per_channel = Vec::with_capacity(record.n_channels());
        for ch in &record.channels {
            per_channel.push(dft.forward(&ch[start..start + block_size]));
        }
        blocks.push(per_channel);
    }
    Ok(blocks)
}

/// Real block matching the given non-redundant spectrum bins: the inverse of
/// one [`block_spectra`] window. `bins` must hold `block_size / 2 + 1` values.
pub fn inverse_spectrum(bins: &[Complex64], block_size: usize) -> Result<Vec<f64>> {
    if !block_size.is_power_of_two() {
        return Err(Error::Parameter(format!(
            "block_size must be a power of two, got {block_size}"
        )));
    }
    if bins.len() != num_bins(block_size) {
        return Err(Error::Dimension(format!(
            "expected {} bins for a {block_size}-point block, got {}",
            num_bins(block_size),
            bins.len()
        )));
    }
    Ok(RealDft::new(block_size).inverse(bins))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(samples: &[f64]) -> TimeSeries {
        TimeSeries::new(1000.0, samples.to_vec()).unwrap()
    }

    #[test]
    fn remove_mean_of_constant_is_zero() {
        let out = remove_mean(&ts(&[5.0, 5.0, 5.0, 5.0]));
        assert_eq!(out.samples, vec![0.0; 4]);
    }

    #[test]
    fn remove_mean_hand_computed() {
        let out = remove_mean(&ts(&[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(out.samples, vec![-1.5, -0.5, 0.5, 1.5]);
    }

    #[test]
    fn remove_mean_leaves_zero_mean_input_unchanged() {
        let x = ts(&[1.0, -1.0, 2.0, -2.0]);
        let out = remove_mean(&x);
        for (a, b) in x.samples.iter().zip(&out.samples) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn autocorrelation_peaks_at_zero_lag() {
        let x = ts(&[0.3, -1.2, 0.8, 2.1, -0.5, 0.9, -1.7, 0.2]);
        let ccf = cross_correlation(&x, &x, 4).unwrap();
        assert_eq!(ccf.highest_peak().lag_or_tap, 0);
    }

    #[test]
    fn delayed_copy_peaks_at_the_delay() {
        // b equals a delayed by 3 samples, zero-padded at the front.
        let a = ts(&[1.0, -2.0, 3.0, -1.0, 0.5, 0.7, -0.9, 0.1, 0.0, 0.0, 0.0]);
        let mut delayed = vec![0.0; a.len()];
        for t in 3..a.len() {
            delayed[t] = a.samples[t - 3];
        }
        let b = ts(&delayed);
        let ccf = cross_correlation(&a, &b, 5).unwrap();

        // Oracle: brute-force scan over every lag.
        let mut best_lag = 0;
        let mut best = f64::MIN;
        for lag in -5i64..=5 {
            let v = ccf.value_at(lag).unwrap().abs();
            if v > best {
                best = v;
                best_lag = lag;
            }
        }
        assert_eq!(best_lag, 3);
        assert_eq!(ccf.highest_peak().lag_or_tap, 3);
    }

    #[test]
    fn cross_correlation_rejects_mismatched_inputs() {
        let a = ts(&[1.0, 2.0, 3.0]);
        let b = TimeSeries::new(2000.0, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            cross_correlation(&a, &b, 1),
            Err(Error::Dimension(_))
        ));
        let c = ts(&[1.0, 2.0]);
        assert!(matches!(
            cross_correlation(&a, &c, 1),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            cross_correlation(&a, &a, 3),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn normalization_divides_by_overlap_length() {
        // Two-sample signals: at lag 1 the single product a[0]*b[1] is
        // divided by overlap 1; at lag 0 the two products are divided by 2.
        let a = ts(&[2.0, 4.0]);
        let b = ts(&[1.0, 3.0]);
        let ccf = cross_correlation(&a, &b, 1).unwrap();
        assert_eq!(ccf.value_at(0).unwrap(), (2.0 + 12.0) / 2.0);
        assert_eq!(ccf.value_at(1).unwrap(), 6.0 / 1.0);
        assert_eq!(ccf.value_at(-1).unwrap(), 4.0 / 1.0);
    }

    #[test]
    fn peak_simple() {
        let p = find_highest_peak(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(p.lag_or_tap, 1);
        assert_eq!(p.value, 1.0);
        assert!(!p.degenerate);
    }

    #[test]
    fn peak_uses_magnitude() {
        let p = find_highest_peak(&[3.0, -5.0, 2.0]).unwrap();
        assert_eq!(p.lag_or_tap, 1);
        assert_eq!(p.value, 5.0);
    }

    #[test]
    fn peak_ties_break_toward_smallest_index() {
        let p = find_highest_peak(&[0.0, 2.0, 0.0, -2.0, 0.0]).unwrap();
        assert_eq!(p.lag_or_tap, 1);
        assert_eq!(p.prominence, 1.0, "equal rivals mean prominence 1");
    }

    #[test]
    fn peak_all_zero_is_degenerate() {
        let p = find_highest_peak(&[0.0, 0.0, 0.0]).unwrap();
        assert!(p.degenerate);
        assert_eq!(p.prominence, 1.0);
    }

    #[test]
    fn peak_prominence_ratio() {
        // Local maxima at magnitudes 4 (index 1) and 2 (index 3).
        let p = find_highest_peak(&[0.0, 4.0, 0.0, 2.0, 0.0]).unwrap();
        assert_eq!(p.lag_or_tap, 1);
        assert!((p.prominence - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lone_impulse_has_capped_prominence() {
        let mut v = vec![0.0; 32];
        v[7] = 3.0;
        let p = find_highest_peak(&v).unwrap();
        assert_eq!(p.lag_or_tap, 7);
        assert_eq!(p.prominence, PROMINENCE_CAP);
    }

    #[test]
    fn block_count_matches_frame_arithmetic() {
        let rec =
            MultichannelRecord::new(1e6, vec![vec![0.5; 1000], vec![0.25; 1000]]).unwrap();
        let blocks = block_spectra(&rec, 512, 512).unwrap();
        assert_eq!(blocks.len(), (1000 - 512) / 512 + 1);
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].len(), 2);
        assert_eq!(blocks[0][0].len(), 257);
    }

    #[test]
    fn sinusoid_energy_lands_in_its_bin() {
        let n = 256;
        let k = 12;
        let samples: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * k as f64 * t as f64 / n as f64).cos())
            .collect();
        let rec = MultichannelRecord::new(1e6, vec![samples.clone(), samples]).unwrap();
        let blocks = block_spectra(&rec, n, n).unwrap();
        let spec = &blocks[0][0];
        for (bin, value) in spec.iter().enumerate() {
            if bin == k {
                assert!((value.norm() - n as f64 / 2.0).abs() < 1e-9);
            } else {
                assert!(value.norm() < 1e-9, "leakage at bin {bin}: {}", value.norm());
            }
        }
    }

    #[test]
    fn block_round_trip() {
        let samples: Vec<f64> = (0..64).map(|t| ((t * t) as f64 * 0.01).sin()).collect();
        let rec = MultichannelRecord::new(1e6, vec![samples.clone(), samples.clone()]).unwrap();
        let blocks = block_spectra(&rec, 64, 64).unwrap();
        let back = inverse_spectrum(&blocks[0][0], 64).unwrap();
        for (a, b) in samples.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9 * samples.iter().fold(1.0, |m, v| v.abs().max(m)));
        }
    }

    #[test]
    fn short_record_is_rejected() {
        let rec = MultichannelRecord::new(1e6, vec![vec![0.1; 100], vec![0.2; 100]]).unwrap();
        assert!(matches!(
            block_spectra(&rec, 128, 128),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn record_rejects_ragged_channels() {
        assert!(matches!(
            MultichannelRecord::new(1e6, vec![vec![0.0; 3], vec![0.0; 4]]),
            Err(Error::Dimension(_))
        ));
    }
}
