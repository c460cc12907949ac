//! Delay-to-coordinate mapping on a 1-D band.
//!
//! Geometry: two sensors on a band, sources confined to a testing range
//! between them. The inter-sensor arrival difference is strictly monotone
//! in source coordinate, so a set of prototype sources at known coordinates
//! with known delays pins down the inverse map. A Gaussian-kernel
//! regression over those prototypes turns any measured delay into a
//! coordinate without ever fitting an explicit propagation model.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Two sensors and a testing range on a 1-D band. Coordinates are meters
/// with the origin wherever the scenario puts it; the range must lie
/// strictly between the sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandGeometry {
    pub sensor_1_pos_m: f64,
    pub sensor_2_pos_m: f64,
    /// `[min, max]` of admissible source coordinates.
    pub testing_range_m: [f64; 2],
    pub wave_speed_m_per_s: f64,
    pub sample_rate_hz: f64,
}

impl BandGeometry {
    pub fn new(
        sensor_1_pos_m: f64,
        sensor_2_pos_m: f64,
        testing_range_m: [f64; 2],
        wave_speed_m_per_s: f64,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        let g = Self {
            sensor_1_pos_m,
            sensor_2_pos_m,
            testing_range_m,
            wave_speed_m_per_s,
            sample_rate_hz,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.sensor_1_pos_m,
            self.sensor_2_pos_m,
            self.testing_range_m[0],
            self.testing_range_m[1],
            self.wave_speed_m_per_s,
            self.sample_rate_hz,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("geometry fields must be finite".into()));
        }
        if self.sensor_1_pos_m >= self.sensor_2_pos_m {
            return Err(Error::Parameter(format!(
                "sensor_1_pos_m ({}) must lie left of sensor_2_pos_m ({})",
                self.sensor_1_pos_m, self.sensor_2_pos_m
            )));
        }
        let [lo, hi] = self.testing_range_m;
        if lo >= hi {
            return Err(Error::Parameter(format!(
                "testing_range_m must satisfy min < max, got [{lo}, {hi}]"
            )));
        }
        if lo <= self.sensor_1_pos_m || hi >= self.sensor_2_pos_m {
            return Err(Error::Parameter(format!(
                "testing range [{lo}, {hi}] must lie strictly between the sensors ({}, {})",
                self.sensor_1_pos_m, self.sensor_2_pos_m
            )));
        }
        if self.wave_speed_m_per_s <= 0.0 {
            return Err(Error::Parameter(format!(
                "wave_speed_m_per_s must be positive, got {}",
                self.wave_speed_m_per_s
            )));
        }
        if self.sample_rate_hz <= 0.0 {
            return Err(Error::Parameter(format!(
                "sample_rate_hz must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }

    pub fn sensor_spacing_m(&self) -> f64 {
        self.sensor_2_pos_m - self.sensor_1_pos_m
    }

    pub fn midpoint_m(&self) -> f64 {
        0.5 * (self.sensor_1_pos_m + self.sensor_2_pos_m)
    }

    /// Largest inter-sensor delay magnitude (in samples, rounded up) any
    /// in-range source can produce; a natural `max_lag` for correlation
    /// searches.
    pub fn max_delay_samples(&self) -> usize {
        let span = self.sensor_spacing_m() / self.wave_speed_m_per_s;
        (span * self.sample_rate_hz).ceil() as usize
    }
}

/// Inter-sensor arrival difference for a source at `y`, in seconds.
///
/// `(|y - sensor_2| - |y - sensor_1|) / wave_speed`: positive when the wave
/// reaches sensor 2 later, matching the delay sign convention. Strictly
/// decreasing in `y` between the sensors (slope `-2 / wave_speed`).
pub fn delay_for_position(g: &BandGeometry, y: f64) -> Result<f64> {
    g.validate()?;
    let [lo, hi] = g.testing_range_m;
    if !y.is_finite() || y < lo || y > hi {
        return Err(Error::Parameter(format!(
            "position {y} m is outside the testing range [{lo}, {hi}]"
        )));
    }
    Ok(((y - g.sensor_2_pos_m).abs() - (y - g.sensor_1_pos_m).abs()) / g.wave_speed_m_per_s)
}

/// A reference source at a known coordinate with its known delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub delay_s: f64,
    pub coordinate_m: f64,
}

/// The locator's training set: prototypes ordered by coordinate plus the
/// Gaussian kernel width used to interpolate between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    pub prototypes: Vec<Prototype>,
    pub kernel_width_sigma_s: f64,
}

impl PrototypeSet {
    /// Prototypes must be in strictly increasing coordinate order with
    /// strictly decreasing delays — the shape 1-D two-sensor geometry
    /// guarantees and the locator relies on.
    pub fn new(prototypes: Vec<Prototype>, kernel_width_sigma_s: f64) -> Result<Self> {
        if prototypes.len() < 2 {
            return Err(Error::Parameter(format!(
                "need at least 2 prototypes, got {}",
                prototypes.len()
            )));
        }
        if prototypes
            .iter()
            .any(|p| !p.delay_s.is_finite() || !p.coordinate_m.is_finite())
        {
            return Err(Error::Parameter("prototype entries must be finite".into()));
        }
        for pair in prototypes.windows(2) {
            if pair[1].coordinate_m <= pair[0].coordinate_m {
                return Err(Error::Parameter(
                    "prototype coordinates must be strictly increasing".into(),
                ));
            }
            if pair[1].delay_s >= pair[0].delay_s {
                return Err(Error::Parameter(
                    "prototype delays must be strictly decreasing with coordinate".into(),
                ));
            }
        }
        if !kernel_width_sigma_s.is_finite() || kernel_width_sigma_s <= 0.0 {
            return Err(Error::Parameter(format!(
                "kernel_width_sigma_s must be positive, got {kernel_width_sigma_s}"
            )));
        }
        Ok(Self {
            prototypes,
            kernel_width_sigma_s,
        })
    }

    /// `(smallest, largest)` prototype delay.
    pub fn delay_span_s(&self) -> (f64, f64) {
        let first = self.prototypes.first().expect("validated non-empty").delay_s;
        let last = self.prototypes.last().expect("validated non-empty").delay_s;
        (last.min(first), last.max(first))
    }

    /// `(smallest, largest)` prototype coordinate.
    pub fn coordinate_hull_m(&self) -> (f64, f64) {
        (
            self.prototypes.first().expect("validated non-empty").coordinate_m,
            self.prototypes.last().expect("validated non-empty").coordinate_m,
        )
    }
}

/// Median absolute delay gap between adjacent prototypes: the default
/// kernel width. One gap wide is narrow enough to resolve neighbouring
/// prototypes and wide enough that interpolation between them stays smooth.
pub fn default_sigma_s(prototypes: &[Prototype]) -> f64 {
    let mut gaps: Vec<f64> = prototypes
        .windows(2)
        .map(|p| (p[1].delay_s - p[0].delay_s).abs())
        .collect();
    gaps.sort_by(|a, b| a.total_cmp(b));
    gaps[gaps.len() / 2]
}

/// Lay prototypes across the testing range every `spacing` meters (the last
/// one lands on the range end when the span divides evenly) and compute each
/// one's delay from the geometry. `sigma` of `None` picks the default
/// kernel width via [`default_sigma_s`].
pub fn build_prototypes(
    g: &BandGeometry,
    spacing: f64,
    sigma: Option<f64>,
) -> Result<PrototypeSet> {
    g.validate()?;
    let [lo, hi] = g.testing_range_m;
    if !spacing.is_finite() || spacing <= 0.0 {
        return Err(Error::Parameter(format!(
            "prototype spacing must be positive, got {spacing}"
        )));
    }
    if spacing > hi - lo {
        return Err(Error::Parameter(format!(
            "prototype spacing {spacing} m exceeds the testing range span {} m",
            hi - lo
        )));
    }
    let mut prototypes = Vec::new();
    let mut i = 0usize;
    loop {
        let y = lo + i as f64 * spacing;
        // Absorb accumulated rounding so an exact multiple still lands on
        // the range end instead of falling just outside it.
        if y > hi + spacing * 1e-9 {
            break;
        }
        let y_in_range = y.clamp(lo, hi);
        prototypes.push(Prototype {
            delay_s: delay_for_position(g, y_in_range)?,
            coordinate_m: y_in_range,
        });
        i += 1;
    }
    let sigma = match sigma {
        Some(s) => s,
        None => default_sigma_s(&prototypes),
    };
    PrototypeSet::new(prototypes, sigma)
}

/// Extra observations attached to a location result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocateFlag {
    /// The measured delay lies outside the prototype delay span; the result
    /// sits at (or near) the hull boundary.
    OutOfRange,
    /// Every kernel weight underflowed to zero; the result is the nearest
    /// prototype's coordinate rather than a weighted blend.
    UnderflowFallback,
}

/// A located source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateResult {
    pub coordinate_m: f64,
    /// The measured delay the coordinate was derived from.
    pub delay_s: f64,
    pub flags: Vec<LocateFlag>,
}

/// Kernel-regression estimate of the source coordinate for a measured
/// delay: a Gaussian-weighted average of prototype coordinates,
/// `sum y_i w_i / sum w_i` with `w_i = exp(-(d - d_i)^2 / (2 sigma^2))`.
///
/// The output is a convex combination of prototype coordinates, so it can
/// never leave their hull — out-of-span delays saturate at the boundary
/// (flagged). If the delay is so far out that every weight underflows, the
/// nearest prototype's coordinate is returned and flagged.
pub fn grnn_locate(delay_s: f64, p: &PrototypeSet) -> Result<LocateResult> {
    if !delay_s.is_finite() {
        return Err(Error::Parameter(format!(
            "delay must be finite, got {delay_s}"
        )));
    }
    let sigma = p.kernel_width_sigma_s;
    let mut flags = Vec::new();
    let (d_lo, d_hi) = p.delay_span_s();
    if delay_s < d_lo || delay_s > d_hi {
        flags.push(LocateFlag::OutOfRange);
    }

    let mut num = 0.0;
    let mut den = 0.0;
    for proto in &p.prototypes {
        let z = (delay_s - proto.delay_s) / sigma;
        let w = (-0.5 * z * z).exp();
        num += w * proto.coordinate_m;
        den += w;
    }

    let (hull_lo, hull_hi) = p.coordinate_hull_m();
    let coordinate_m = if den == 0.0 {
        flags.push(LocateFlag::UnderflowFallback);
        let nearest = p
            .prototypes
            .iter()
            .min_by(|a, b| {
                (delay_s - a.delay_s)
                    .abs()
                    .total_cmp(&(delay_s - b.delay_s).abs())
            })
            .expect("validated non-empty");
        nearest.coordinate_m
    } else {
        // The quotient is mathematically inside the hull; clamp away the
        // last-bit rounding so the hull invariant holds exactly.
        (num / den).clamp(hull_lo, hull_hi)
    };

    Ok(LocateResult {
        coordinate_m,
        delay_s,
        flags,
    })
}
