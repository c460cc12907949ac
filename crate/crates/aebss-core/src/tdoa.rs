//! Time-delay estimation between two sensors.
//!
//! Two routes to the same quantity: the cross-correlation peak, which sees
//! only the most powerful source, and per-source peak differences between
//! recovered mixing filters, which work with several simultaneously active
//! sources.
//!
//! Sign convention, used everywhere downstream: a positive delay means the
//! wave reaches sensor 2 (channel index 1) *later* than sensor 1 (channel
//! index 0).

use crate::error::{Error, Result};
use crate::fir::{FilterMatrix, FilterRole, FirFilter};
use crate::signal::{cross_correlation, remove_mean, MultichannelRecord};
use serde::{Deserialize, Serialize};

/// One per-source delay measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    /// Which source the estimate belongs to. For filter-based estimates this
    /// is the column index in the mixing matrix; separation recovers sources
    /// in arbitrary order, so treat a collection of estimates as a set.
    pub source_index: usize,
    /// Arrival at sensor 2 minus arrival at sensor 1, in samples.
    pub delay_samples: i64,
    /// `delay_samples` converted at the record's sample rate.
    pub delay_seconds: f64,
    /// Peak prominence ratio, always >= 1. The floor value 1 marks an
    /// estimate with no competing peak evidence (or a degenerate flat
    /// input); it is a diagnostic and never gates results.
    pub confidence: f64,
}

/// Delay of the most powerful source via the cross-correlation peak.
///
/// Channel means are removed first so offsets cannot bias the correlation.
/// Whatever the number of active sources, this returns exactly one estimate:
/// overlapping sources leave only the strongest one's peak dominant, which
/// is precisely the limitation the filter-based route removes.
pub fn delay_from_ccf(record: &MultichannelRecord, max_lag: usize) -> Result<DelayEstimate> {
    if record.n_channels() != 2 {
        return Err(Error::Dimension(format!(
            "cross-correlation delay needs exactly 2 channels, got {}",
            record.n_channels()
        )));
    }
    let a = remove_mean(&record.series(0));
    let b = remove_mean(&record.series(1));
    let ccf = cross_correlation(&a, &b, max_lag)?;
    let peak = ccf.highest_peak();
    if peak.degenerate {
        log::warn!("flat cross-correlation: delay estimate carries floor confidence");
    }
    Ok(DelayEstimate {
        source_index: 0,
        delay_samples: peak.lag_or_tap,
        delay_seconds: peak.lag_or_tap as f64 / record.sample_rate,
        confidence: peak.prominence,
    })
}

/// Per-source delays from the tap peaks of recovered mixing filters.
///
/// Column `j` of the mixing matrix holds source `j`'s propagation filters to
/// each sensor; the delay is the highest-magnitude peak tap of the sensor-2
/// filter minus that of the sensor-1 filter, so the matrix's zero-delay
/// origin cancels. Confidence is the smaller of the two peak prominences.
///
/// A filter with no energy pins its arrival to the zero-delay tap and pulls
/// the confidence down to the floor value 1; a column with *both* filters
/// empty names a missing source instead.
pub fn delays_from_mixing(a: &FilterMatrix, sample_rate: f64) -> Result<Vec<DelayEstimate>> {
    if a.role != FilterRole::Mixing {
        return Err(Error::Parameter(
            "delay extraction expects mixing-role filters (sensor = filter * source)".into(),
        ));
    }
    if !sample_rate.is_finite() || sample_rate <= 0.0 {
        return Err(Error::Parameter(format!(
            "sample_rate must be finite and positive, got {sample_rate}"
        )));
    }
    let peak_tap = |f: &FirFilter| -> (i64, f64, bool) {
        let p = f.peak();
        if p.degenerate {
            (a.zero_delay_tap as i64, p.prominence, true)
        } else {
            (p.lag_or_tap, p.prominence, false)
        }
    };

    let mut estimates = Vec::with_capacity(a.n);
    for j in 0..a.n {
        let (tap_1, prom_1, empty_1) = peak_tap(a.entry(0, j));
        let (tap_2, prom_2, empty_2) = peak_tap(a.entry(1, j));
        if empty_1 && empty_2 {
            return Err(Error::MissingSource { column: j });
        }
        let delay_samples = tap_2 - tap_1;
        estimates.push(DelayEstimate {
            source_index: j,
            delay_samples,
            delay_seconds: delay_samples as f64 / sample_rate,
            confidence: prom_1.min(prom_2),
        });
    }
    Ok(estimates)
}
