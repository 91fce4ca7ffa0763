//! Sampled telemetry, Ah-indexed trajectories and coulomb counting.
//!
//! All integrals use the trapezoidal rule on the sampled current and are
//! reported in ampere-hours. Accumulated throughput is measured from the
//! first sample of a stream, which is taken as `Ah = 0`.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SECONDS_PER_HOUR: f64 = 3600.0;

/// One telemetry sample. Positive current charges the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSample {
    /// Seconds.
    pub t: f64,
    /// Amperes, positive = charge.
    pub current: f64,
    /// Volts.
    pub voltage: f64,
    /// Cell surface temperature, degrees Celsius.
    pub temperature: f64,
}

impl TimeSample {
    pub fn new(t: f64, current: f64, voltage: f64, temperature: f64) -> Self {
        Self {
            t,
            current,
            voltage,
            temperature,
        }
    }
}

/// Fails with [`Error::NonMonotonicTime`] at the first sample whose time does
/// not strictly exceed its predecessor's (or is not finite and non-negative).
pub fn check_time_monotonic(samples: &[TimeSample]) -> Result<()> {
    for (i, s) in samples.iter().enumerate() {
        if !s.t.is_finite() || s.t < 0.0 {
            return Err(Error::NonMonotonicTime { index: i });
        }
        if i > 0 && s.t <= samples[i - 1].t {
            return Err(Error::NonMonotonicTime { index: i });
        }
    }
    Ok(())
}

/// Strictly increasing, non-negative, finite accumulated Ah throughput.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AhSequence(Vec<f64>);

impl AhSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidSequence(format!(
                    "Ah value {v} at index {i} is not a finite non-negative number"
                )));
            }
            if i > 0 && v <= values[i - 1] {
                return Err(Error::InvalidSequence(format!(
                    "Ah sequence not strictly increasing at index {i}"
                )));
            }
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Appends a point; it must exceed the current last value.
    pub fn push(&mut self, ah: f64) -> Result<()> {
        if !ah.is_finite() || ah < 0.0 {
            return Err(Error::InvalidSequence(format!(
                "Ah value {ah} is not a finite non-negative number"
            )));
        }
        if let Some(&last) = self.0.last() {
            if ah <= last {
                return Err(Error::InvalidSequence(format!(
                    "Ah value {ah} does not exceed last value {last}"
                )));
            }
        }
        self.0.push(ah);
        Ok(())
    }
}

impl Deref for AhSequence {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A curve sampled over accumulated Ah throughput.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    ah: AhSequence,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn new(ah: AhSequence, values: Vec<f64>) -> Result<Self> {
        if ah.len() != values.len() {
            return Err(Error::LengthMismatch(ah.len(), values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSequence(format!(
                "non-finite trajectory value at index {i}"
            )));
        }
        Ok(Self { ah, values })
    }

    /// Builds a trajectory from raw vectors, validating the abscissa.
    pub fn from_vecs(ah: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(AhSequence::new(ah)?, values)
    }

    pub fn ah(&self) -> &AhSequence {
        &self.ah
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(first, last)` Ah of the trajectory, if non-empty.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((*self.ah.first()?, *self.ah.last()?))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ah.iter().copied().zip(self.values.iter().copied())
    }

    /// Linear interpolation at `ah`; exact at the trajectory's own abscissae.
    pub fn value_at(&self, ah: f64) -> Result<f64> {
        let xs = self.ah.as_slice();
        let (lo, hi) = match self.span() {
            Some(span) => span,
            None => {
                return Err(Error::OutOfRangeGrid {
                    point: ah,
                    lo: f64::NAN,
                    hi: f64::NAN,
                })
            }
        };
        if !(ah >= lo && ah <= hi) {
            return Err(Error::OutOfRangeGrid { point: ah, lo, hi });
        }
        match xs.binary_search_by(|x| x.total_cmp(&ah)) {
            Ok(i) => Ok(self.values[i]),
            Err(i) => {
                // lo < ah < hi, so 1 <= i < len
                let (x0, x1) = (xs[i - 1], xs[i]);
                let (y0, y1) = (self.values[i - 1], self.values[i]);
                Ok(y0 + (y1 - y0) * (ah - x0) / (x1 - x0))
            }
        }
    }

    /// Multiplies every value by `factor`, keeping the grid.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            ah: self.ah.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Signed charge in Ah between `t_start` and `t_end`.
///
/// The current is treated as piecewise linear between samples, so window
/// edges that fall between samples are interpolated and the result is
/// additive over any split of the window.
pub fn integrate_charge(samples: &[TimeSample], t_start: f64, t_end: f64) -> Result<f64> {
    check_time_monotonic(samples)?;
    let empty = Error::EmptyWindow { t_start, t_end };
    let (first, last) = match (samples.first(), samples.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Err(empty),
    };
    if !(t_start < t_end) || t_start < first || t_end > last {
        return Err(empty);
    }
    let inside = samples
        .iter()
        .filter(|s| s.t >= t_start && s.t <= t_end)
        .count();
    if inside < 2 {
        return Err(empty);
    }

    let mut amp_seconds = 0.0;
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let lo = a.t.max(t_start);
        let hi = b.t.min(t_end);
        if hi <= lo {
            continue;
        }
        let i_lo = lerp_current(a, b, lo);
        let i_hi = lerp_current(a, b, hi);
        amp_seconds += 0.5 * (i_lo + i_hi) * (hi - lo);
    }
    Ok(amp_seconds / SECONDS_PER_HOUR)
}

fn lerp_current(a: &TimeSample, b: &TimeSample, t: f64) -> f64 {
    if t == a.t {
        a.current
    } else if t == b.t {
        b.current
    } else {
        a.current + (b.current - a.current) * (t - a.t) / (b.t - a.t)
    }
}

/// Accumulated throughput `∫|I| dt` in Ah from the first sample up to `t_end`.
pub fn accumulate_ah(samples: &[TimeSample], t_end: f64) -> Result<f64> {
    check_time_monotonic(samples)?;
    let (first, last) = match (samples.first(), samples.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => {
            return Err(Error::EmptyWindow {
                t_start: 0.0,
                t_end,
            })
        }
    };
    if t_end < first || t_end > last {
        return Err(Error::EmptyWindow {
            t_start: first,
            t_end,
        });
    }
    let mut amp_seconds = 0.0;
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.t >= t_end {
            break;
        }
        if b.t <= t_end {
            amp_seconds += 0.5 * (a.current.abs() + b.current.abs()) * (b.t - a.t);
        } else {
            let frac = (t_end - a.t) / (b.t - a.t);
            let i_end = a.current.abs() + (b.current.abs() - a.current.abs()) * frac;
            amp_seconds += 0.5 * (a.current.abs() + i_end) * (t_end - a.t);
        }
    }
    Ok(amp_seconds / SECONDS_PER_HOUR)
}

/// Accumulated throughput at every sample, same rule as [`accumulate_ah`].
pub fn cumulative_ah(samples: &[TimeSample]) -> Result<Vec<f64>> {
    check_time_monotonic(samples)?;
    let mut out = Vec::with_capacity(samples.len());
    let mut amp_seconds = 0.0;
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            let a = &samples[i - 1];
            amp_seconds += 0.5 * (a.current.abs() + s.current.abs()) * (s.t - a.t);
        }
        out.push(amp_seconds / SECONDS_PER_HOUR);
    }
    Ok(out)
}

/// Divides a capacity trajectory by the initial capacity `q0`.
pub fn normalize_capacity(traj: &Trajectory, q0: f64) -> Result<Trajectory> {
    if !(q0 > 0.0) || !q0.is_finite() {
        return Err(Error::NonPositiveQ0(q0));
    }
    Ok(Trajectory {
        ah: traj.ah.clone(),
        values: traj.values.iter().map(|v| v / q0).collect(),
    })
}

/// Resamples `traj` onto `grid` by linear interpolation. No extrapolation.
pub fn align_to_grid(traj: &Trajectory, grid: &AhSequence) -> Result<Trajectory> {
    let values = grid
        .iter()
        .map(|&x| traj.value_at(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        ah: grid.clone(),
        values,
    })
}
