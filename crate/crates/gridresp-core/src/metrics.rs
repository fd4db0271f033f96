//! Scalar performance metrics over sampled trajectories.
//!
//! All operations take parallel `times`/`values` slices (uniform or not) and
//! are pure. Frequency metrics expect traces already converted to Hz via
//! f = f₀(1 + Δω); voltage metrics take the Δ|V| error trace in pu.

use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
    #[error("trace has fewer than 2 samples")]
    TooShort,
    #[error("bad interval [{t0}, {ts}] for trace over [{lo}, {hi}]")]
    BadInterval { t0: f64, ts: f64, lo: f64, hi: f64 },
    #[error("sample rate must be positive")]
    BadSampleRate,
}

fn check(times: &[f64], values: &[f64]) -> Result<(), MetricsError> {
    if times.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    if times.len() != values.len() {
        return Err(MetricsError::LengthMismatch { times: times.len(), values: values.len() });
    }
    Ok(())
}

/// Linear interpolation at `t`; `times` ascending, `t` within range.
fn interp(times: &[f64], values: &[f64], t: f64) -> f64 {
    let k = times.partition_point(|&x| x < t);
    if k == 0 {
        return values[0];
    }
    if k == times.len() {
        return values[times.len() - 1];
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    values[k - 1] + w * (values[k] - values[k - 1])
}

/// Frequency extremum farthest from f₀ and its time (earliest on ties).
/// For an under-frequency event this is the minimum ("nadir"); a constant
/// trace reports f₀'s value at t = 0.
pub fn nadir(times: &[f64], f_hz: &[f64], f0: f64) -> Result<(f64, f64), MetricsError> {
    check(times, f_hz)?;
    let mut best = 0usize;
    let mut best_dev = (f_hz[0] - f0).abs();
    for k in 1..f_hz.len() {
        let dev = (f_hz[k] - f0).abs();
        if dev > best_dev {
            best = k;
            best_dev = dev;
        }
    }
    Ok((f_hz[best], times[best]))
}

/// Signed maximum-magnitude rate of change, Hz/s, measured on a PMU-style
/// resampling: the trace is linearly interpolated onto a uniform grid at
/// `sample_rate` and consecutive differences are scaled back by the rate.
pub fn rocof(times: &[f64], f_hz: &[f64], sample_rate: f64) -> Result<f64, MetricsError> {
    check(times, f_hz)?;
    if !(sample_rate > 0.0) {
        return Err(MetricsError::BadSampleRate);
    }
    let (lo, hi) = (times[0], times[times.len() - 1]);
    let steps = ((hi - lo) * sample_rate + 1e-9).floor() as usize;
    if steps < 1 {
        return Err(MetricsError::TooShort);
    }
    let mut worst = 0.0f64;
    let mut prev = interp(times, f_hz, lo);
    for k in 1..=steps {
        let t = lo + k as f64 / sample_rate;
        let cur = interp(times, f_hz, t.min(hi));
        let d = cur - prev;
        if d.abs() > worst.abs() {
            worst = d;
        }
        prev = cur;
    }
    Ok(worst * sample_rate)
}

/// ∫|f₀ − f(t)|dt on [t0, ts] by the trapezoid rule, with the boundary
/// points interpolated onto the exact interval ends.
pub fn hertz_sec(
    times: &[f64],
    f_hz: &[f64],
    f0: f64,
    t0: f64,
    ts: f64,
) -> Result<f64, MetricsError> {
    check(times, f_hz)?;
    let (lo, hi) = (times[0], times[times.len() - 1]);
    if !(t0 < ts) || t0 < lo - 1e-12 || ts > hi + 1e-12 {
        return Err(MetricsError::BadInterval { t0, ts, lo, hi });
    }
    let dev = |f: f64| (f0 - f).abs();
    let mut total = 0.0;
    let mut t_prev = t0;
    let mut d_prev = dev(interp(times, f_hz, t0));
    let first = times.partition_point(|&x| x <= t0);
    for k in first..times.len() {
        if times[k] >= ts {
            break;
        }
        let d = dev(f_hz[k]);
        total += 0.5 * (d_prev + d) * (times[k] - t_prev);
        t_prev = times[k];
        d_prev = d;
    }
    let d_end = dev(interp(times, f_hz, ts));
    total += 0.5 * (d_prev + d_end) * (ts - t_prev);
    Ok(total)
}

/// Settling verdict: either the earliest time after which the trace stays
/// within the band for the rest of the horizon, or a sentinel when the trace
/// is still violating the band at the second-to-last sample.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SettlingTime {
    Settled(f64),
    Unsettled,
}

/// 2%-band (configurable) settling time against the trace's own final value;
/// the band is `band_fraction` of the maximum deviation from that final
/// value. A constant trace settles at the start.
pub fn settling_time(
    times: &[f64],
    values: &[f64],
    band_fraction: f64,
) -> Result<SettlingTime, MetricsError> {
    check(times, values)?;
    let last = values[values.len() - 1];
    let maxdev = values.iter().fold(0.0f64, |m, &x| m.max((x - last).abs()));
    if maxdev == 0.0 {
        return Ok(SettlingTime::Settled(times[0]));
    }
    let band = band_fraction * maxdev;
    let last_violation = (0..values.len()).rev().find(|&k| (values[k] - last).abs() > band);
    match last_violation {
        None => Ok(SettlingTime::Settled(times[0])),
        Some(k) if k + 2 >= times.len() => Ok(SettlingTime::Unsettled),
        Some(k) => Ok(SettlingTime::Settled(times[k + 1])),
    }
}

/// Largest |Δ|V|| and its time (earliest on ties).
pub fn max_voltage_deviation(
    times: &[f64],
    dv: &[f64],
) -> Result<(f64, f64), MetricsError> {
    check(times, dv)?;
    let mut best = 0usize;
    for k in 1..dv.len() {
        if dv[k].abs() > dv[best].abs() {
            best = k;
        }
    }
    Ok((dv[best].abs(), times[best]))
}

/// Converts a pu frequency-deviation series to Hz: f = f₀(1 + Δω).
pub fn to_frequency_hz(f0: f64, omega_pu: &[f64]) -> Vec<f64> {
    omega_pu.iter().map(|&w| f0 * (1.0 + w)).collect()
}

#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrequencyMetrics {
    pub nadir_hz: f64,
    pub nadir_time_s: f64,
    pub rocof_hz_per_s: f64,
    pub hertz_sec: f64,
    /// None when the trace never settles within the horizon.
    pub settling_time_s: Option<f64>,
    pub steady_state_deviation_hz: f64,
}

/// Bundles the frequency metrics of one bus trace. `hertz_sec` integrates
/// from t0 = 0 to the settling time when the trace settles, else to the end
/// of the horizon.
pub fn frequency_metrics(
    times: &[f64],
    f_hz: &[f64],
    f0: f64,
    sample_rate: f64,
    band_fraction: f64,
) -> Result<FrequencyMetrics, MetricsError> {
    check(times, f_hz)?;
    let (nadir_hz, nadir_time_s) = nadir(times, f_hz, f0)?;
    let rocof_hz_per_s = rocof(times, f_hz, sample_rate)?;
    let settle = settling_time(times, f_hz, band_fraction)?;
    let settling_time_s = match settle {
        SettlingTime::Settled(t) => Some(t),
        SettlingTime::Unsettled => None,
    };
    let t_end = times[times.len() - 1];
    let ts = settling_time_s.filter(|&t| t > times[0]).unwrap_or(t_end);
    let hs = if ts > times[0] { hertz_sec(times, f_hz, f0, times[0], ts)? } else { 0.0 };
    Ok(FrequencyMetrics {
        nadir_hz,
        nadir_time_s,
        rocof_hz_per_s,
        hertz_sec: hs,
        settling_time_s,
        steady_state_deviation_hz: f_hz[f_hz.len() - 1] - f0,
    })
}

#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VoltageMetrics {
    pub max_deviation_pu: f64,
    pub max_deviation_time_s: f64,
    pub final_deviation_pu: f64,
}

pub fn voltage_metrics(times: &[f64], dv: &[f64]) -> Result<VoltageMetrics, MetricsError> {
    let (max_deviation_pu, max_deviation_time_s) = max_voltage_deviation(times, dv)?;
    Ok(VoltageMetrics {
        max_deviation_pu,
        max_deviation_time_s,
        final_deviation_pu: dv[dv.len() - 1],
    })
}
