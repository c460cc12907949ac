//! FIR filters and square filter matrices: the time-domain form of both the
//! mixing system (sources to sensors) and the learned unmixing system.

use crate::error::{Error, Result};
use crate::signal::{find_highest_peak, MultichannelRecord, PeakResult};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// A finite impulse response: `taps[k]` is the coefficient applied at a
/// delay of `k` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FirFilter {
    pub taps: Vec<f64>,
}

impl FirFilter {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Parameter("a filter needs at least one tap".into()));
        }
        if let Some(i) = taps.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("tap {i} is not finite")));
        }
        Ok(Self { taps })
    }

    /// A length-`len` filter with a single unit tap at `at`.
    pub fn impulse(len: usize, at: usize) -> Result<Self> {
        if at >= len {
            return Err(Error::Parameter(format!(
                "impulse position {at} outside filter length {len}"
            )));
        }
        let mut taps = vec![0.0; len];
        taps[at] = 1.0;
        Ok(Self { taps })
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Highest-magnitude tap; `lag_or_tap` is the tap index.
    pub fn peak(&self) -> PeakResult {
        find_highest_peak(&self.taps).expect("taps are nonempty and finite by construction")
    }
}

/// Whether a filter matrix maps sources to sensors or sensors to sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterRole {
    /// Sources in, sensors out (the propagation model `x = A * s`).
    Mixing,
    /// Sensors in, source estimates out (the learned separator).
    Unmixing,
}

/// A square grid of equal-length FIR filters.
///
/// Entry `(i, j)` filters input channel `j` into output channel `i`; for a
/// mixing matrix the first index is the sensor and the second the source.
/// `zero_delay_tap` records which tap index represents zero delay: `0` for
/// plain causal filters (unmixing), the centre tap for inverted mixing
/// filters, where negative relative delays must be representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterMatrix {
    pub n: usize,
    pub tap_length: usize,
    pub role: FilterRole,
    pub zero_delay_tap: usize,
    /// Row-major: `entries[i * n + j]` is the filter from input `j` to output `i`.
    pub entries: Vec<FirFilter>,
}

impl FilterMatrix {
    pub fn new(
        n: usize,
        role: FilterRole,
        zero_delay_tap: usize,
        entries: Vec<FirFilter>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(format!(
                "a filter matrix needs n >= 2 channels, got {n}"
            )));
        }
        if entries.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} filters for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        let tap_length = entries[0].len();
        for (k, f) in entries.iter().enumerate() {
            if f.len() != tap_length {
                return Err(Error::Dimension(format!(
                    "filter {k} has {} taps where filter 0 has {tap_length}",
                    f.len()
                )));
            }
        }
        if zero_delay_tap >= tap_length {
            return Err(Error::Parameter(format!(
                "zero_delay_tap {zero_delay_tap} outside tap range 0..{tap_length}"
            )));
        }
        Ok(Self {
            n,
            tap_length,
            role,
            zero_delay_tap,
            entries,
        })
    }

    /// Identity action: unit impulses at `zero_delay_tap` on the diagonal.
    pub fn identity(
        n: usize,
        tap_length: usize,
        role: FilterRole,
        zero_delay_tap: usize,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    entries.push(FirFilter::impulse(tap_length, zero_delay_tap)?);
                } else {
                    entries.push(FirFilter::new(vec![0.0; tap_length])?);
                }
            }
        }
        Self::new(n, role, zero_delay_tap, entries)
    }

    pub fn entry(&self, out_ch: usize, in_ch: usize) -> &FirFilter {
        &self.entries[out_ch * self.n + in_ch]
    }

    pub fn entry_mut(&mut self, out_ch: usize, in_ch: usize) -> &mut FirFilter {
        &mut self.entries[out_ch * self.n + in_ch]
    }
}

/// Filter a record through a square FIR matrix.
///
/// Output channel `i` is the sum over inputs `j` of `entry(i, j)` convolved
/// with input channel `j`, truncated to the input length. Linear in the
/// input. Convolution runs in the frequency domain (one zero-padded
/// transform per channel and per entry), which matches direct summation to
/// rounding error while staying fast for long records.
pub fn apply_filter_matrix(f: &FilterMatrix, x: &MultichannelRecord) -> Result<MultichannelRecord> {
    if f.n != x.n_channels() {
        return Err(Error::Dimension(format!(
            "filter matrix is {}x{} but the record has {} channels",
            f.n,
            f.n,
            x.n_channels()
        )));
    }
    let t = x.len();
    let l = f.tap_length;
    let m = (t + l - 1).next_power_of_two();

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);

    let to_padded = |data: &[f64]| -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (slot, &v) in buf.iter_mut().zip(data) {
            *slot = Complex64::new(v, 0.0);
        }
        buf
    };

    // Transform every input channel once, every filter entry once.
    let mut x_spectra = Vec::with_capacity(f.n);
    for ch in &x.channels {
        let mut buf = to_padded(ch);
        fwd.process(&mut buf);
        x_spectra.push(buf);
    }

    let scale = 1.0 / m as f64;
    let mut channels = Vec::with_capacity(f.n);
    for i in 0..f.n {
        let mut acc = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..f.n {
            let mut h = to_padded(&f.entry(i, j).taps);
            fwd.process(&mut h);
            for ((a, &hx), &xx) in acc.iter_mut().zip(&h).zip(&x_spectra[j]) {
                *a += hx * xx;
            }
        }
        inv.process(&mut acc);
        channels.push(acc[..t].iter().map(|c| c.re * scale).collect());
    }
    MultichannelRecord::new(x.sample_rate, channels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(channels: Vec<Vec<f64>>) -> MultichannelRecord {
        MultichannelRecord::new(1000.0, channels).unwrap()
    }

    #[test]
    fn identity_matrix_passes_input_through() {
        let f = FilterMatrix::identity(2, 8, FilterRole::Mixing, 0).unwrap();
        let x = record(vec![
            vec![1.0, -2.0, 3.0, 0.5, 0.0, 0.0, 1.5, -0.5],
            vec![0.1, 0.2, -0.3, 0.4, -0.5, 0.6, 0.7, -0.8],
        ]);
        let y = apply_filter_matrix(&f, &x).unwrap();
        for (a, b) in x.channels.iter().flatten().zip(y.channels.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn off_diagonal_tap_routes_and_delays() {
        // Output 0 = input 1 delayed by 3; output 1 = 0.
        let zero = FirFilter::new(vec![0.0; 8]).unwrap();
        let entries = vec![
            zero.clone(),
            FirFilter::impulse(8, 3).unwrap(),
            zero.clone(),
            zero,
        ];
        let f = FilterMatrix::new(2, FilterRole::Mixing, 0, entries).unwrap();
        let x = record(vec![vec![0.0; 8], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]]);
        let y = apply_filter_matrix(&f, &x).unwrap();
        assert!(
            y.channels[0]
                .iter()
                .zip(&[0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
                .all(|(a, b)| (a - b).abs() < 1e-12)
        );
        assert!(y.channels[1].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn matches_direct_nested_loop_convolution() {
        // Independent route: direct O(n^2 * T * L) summation.
        let taps_a = vec![0.5, -0.25, 0.125, 1.0];
        let taps_b = vec![1.0, 0.0, -1.0, 0.5];
        let taps_c = vec![0.2, 0.4, 0.6, 0.8];
        let taps_d = vec![-0.3, 0.0, 0.0, 0.9];
        let f = FilterMatrix::new(
            2,
            FilterRole::Mixing,
            0,
            vec![
                FirFilter::new(taps_a.clone()).unwrap(),
                FirFilter::new(taps_b.clone()).unwrap(),
                FirFilter::new(taps_c.clone()).unwrap(),
                FirFilter::new(taps_d.clone()).unwrap(),
            ],
        )
        .unwrap();
        let x0: Vec<f64> = (0..32).map(|t| ((t as f64) * 0.37).sin()).collect();
        let x1: Vec<f64> = (0..32).map(|t| ((t as f64) * 0.71).cos()).collect();
        let x = record(vec![x0.clone(), x1.clone()]);
        let y = apply_filter_matrix(&f, &x).unwrap();

        let direct = |taps: &[f64], sig: &[f64], t: usize| -> f64 {
            taps.iter()
                .enumerate()
                .filter(|(k, _)| *k <= t)
                .map(|(k, &h)| h * sig[t - k])
                .sum()
        };
        for t in 0..32 {
            let want0 = direct(&taps_a, &x0, t) + direct(&taps_b, &x1, t);
            let want1 = direct(&taps_c, &x0, t) + direct(&taps_d, &x1, t);
            assert!((y.channels[0][t] - want0).abs() < 1e-10);
            assert!((y.channels[1][t] - want1).abs() < 1e-10);
        }
    }

    #[test]
    fn channel_count_mismatch_is_rejected() {
        let f = FilterMatrix::identity(3, 4, FilterRole::Mixing, 0).unwrap();
        let x = record(vec![vec![0.0; 8], vec![0.0; 8]]);
        assert!(matches!(
            apply_filter_matrix(&f, &x),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn filter_matrix_json_round_trip() {
        let f = FilterMatrix::new(
            2,
            FilterRole::Unmixing,
            0,
            vec![
                FirFilter::new(vec![1.0, 0.5]).unwrap(),
                FirFilter::new(vec![0.0, 0.0]).unwrap(),
                FirFilter::new(vec![0.0, -0.5]).unwrap(),
                FirFilter::new(vec![1.0, 0.25]).unwrap(),
            ],
        )
        .unwrap();
        let text = serde_json::to_string(&f).unwrap();
        assert!(text.contains("\"role\":\"unmixing\""));
        assert!(text.contains("\"zero_delay_tap\":0"));
        let back: FilterMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn ragged_entries_are_rejected() {
        let entries = vec![
            FirFilter::new(vec![1.0, 2.0]).unwrap(),
            FirFilter::new(vec![1.0]).unwrap(),
            FirFilter::new(vec![1.0, 2.0]).unwrap(),
            FirFilter::new(vec![1.0, 2.0]).unwrap(),
        ];
        assert!(matches!(
            FilterMatrix::new(2, FilterRole::Mixing, 0, entries),
            Err(Error::Dimension(_))
        ));
    }
}
