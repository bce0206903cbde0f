//! Distance and bearing measurement models.
//!
//! Two-way ToF noise is injected directly in the distance domain with the
//! raw resolution `c / B` as its standard deviation. AoA and RSS models exist
//! for the method comparison only.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{Channel, ChannelError, ChannelParams, SPEED_OF_LIGHT};

/// Floor applied to noisy ranges that would otherwise be non-positive.
pub const MIN_RANGE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum RangingError {
    #[error("bandwidth must be positive (got {0} Hz)")]
    NonPositiveBandwidth(f64),
    #[error("invalid TS-OOK parameters: {0}")]
    BadTsook(&'static str),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// TS-OOK timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsookParams {
    pub pulse_duration: f64,
    /// Time between symbols divided by the pulse duration.
    pub beta: f64,
    pub k_pulses: u32,
}

impl TsookParams {
    pub fn validate(&self) -> Result<(), RangingError> {
        if !(self.pulse_duration > 0.0 && self.pulse_duration.is_finite()) {
            return Err(RangingError::BadTsook("pulse duration must be positive"));
        }
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(RangingError::BadTsook("beta must be at least 1"));
        }
        if self.k_pulses == 0 {
            return Err(RangingError::BadTsook("at least one pulse per exchange"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementStatus {
    Ok,
    OutOfRange,
    NodeDepleted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub anchor_index: usize,
    pub estimated_distance: f64,
    pub pulses_used: u32,
    pub status: MeasurementStatus,
}

impl Measurement {
    pub fn ok(anchor_index: usize, estimated_distance: f64, pulses_used: u32) -> Self {
        debug_assert!(estimated_distance > 0.0);
        Self { anchor_index, estimated_distance, pulses_used, status: MeasurementStatus::Ok }
    }

    pub fn failed(anchor_index: usize, status: MeasurementStatus) -> Self {
        Self { anchor_index, estimated_distance: f64::NAN, pulses_used: 0, status }
    }
}

/// Raw resolution `c / B`, used as the per-pulse range noise std.
pub fn tof_noise_std(bandwidth: f64) -> Result<f64, RangingError> {
    if !(bandwidth > 0.0) {
        return Err(RangingError::NonPositiveBandwidth(bandwidth));
    }
    Ok(SPEED_OF_LIGHT / bandwidth)
}

/// True distance plus the mean of `k_pulses` Gaussian range errors with std `noise_std`.
pub fn noisy_range<R: Rng + ?Sized>(true_distance: f64, noise_std: f64, k_pulses: u32, rng: &mut R) -> f64 {
    if noise_std == 0.0 {
        return true_distance;
    }
    let k = k_pulses.max(1);
    let sum: f64 = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).sum();
    (true_distance + noise_std * sum / k as f64).max(MIN_RANGE)
}

/// Averaged two-way ToF range estimate for a link of the given bandwidth.
pub fn measure_two_way_tof<R: Rng + ?Sized>(
    true_distance: f64,
    bandwidth: f64,
    k_pulses: u32,
    rng: &mut R,
) -> Result<f64, RangingError> {
    let std = if bandwidth.is_infinite() { 0.0 } else { tof_noise_std(bandwidth)? };
    Ok(noisy_range(true_distance, std, k_pulses, rng))
}

/// Direction of arrival, radians. Azimuth from +x toward +y, elevation from the xy plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bearing {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Bearing {
    pub fn towards(from: &nalgebra::Vector3<f64>, to: &nalgebra::Vector3<f64>) -> Self {
        let v = to - from;
        Self { azimuth: v.y.atan2(v.x), elevation: v.z.atan2(v.x.hypot(v.y)) }
    }

    pub fn unit_vector(&self) -> nalgebra::Vector3<f64> {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        nalgebra::Vector3::new(ce * ca, ce * sa, se)
    }
}

/// Perturbs both angles independently with `Normal(0, sigma)`.
pub fn measure_aoa<R: Rng + ?Sized>(true_bearing: Bearing, sigma: f64, rng: &mut R) -> Bearing {
    let (da, de) = match Normal::new(0.0, sigma) {
        Ok(n) if sigma > 0.0 => (n.sample(rng), n.sample(rng)),
        _ => (0.0, 0.0),
    };
    Bearing {
        azimuth: true_bearing.azimuth + da,
        elevation: (true_bearing.elevation + de).clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
    }
}

/// Bracket for inverting received power back to distance.
pub const RSS_SEARCH_MIN: f64 = 1e-6;
pub const RSS_SEARCH_MAX: f64 = 1e3;
const RSS_TOLERANCE: f64 = 1e-9;

/// Distance whose modeled received power equals `p_rx`. Attenuation grows
/// strictly with distance, so bisection on `[RSS_SEARCH_MIN, RSS_SEARCH_MAX]` applies.
pub fn invert_received_power(channel: &Channel, p_tx: f64, p_rx: f64) -> Result<f64, RangingError> {
    let (mut lo, mut hi) = (RSS_SEARCH_MIN, RSS_SEARCH_MAX);
    if p_rx >= channel.received_power_dbm(p_tx, lo)? {
        return Ok(lo);
    }
    if p_rx <= channel.received_power_dbm(p_tx, hi)? {
        return Ok(hi);
    }
    while hi - lo > RSS_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if channel.received_power_dbm(p_tx, mid)? > p_rx {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// RSS ranging: forward channel, `Normal(0, sigma_db)` power error, inversion.
pub fn measure_rss_distance<R: Rng + ?Sized>(
    true_distance: f64,
    params: &ChannelParams,
    p_tx: f64,
    sigma_db: f64,
    rng: &mut R,
) -> Result<f64, RangingError> {
    let channel = Channel::new(params.clone())?;
    measure_rss_with(&channel, true_distance, p_tx, sigma_db, rng)
}

/// [`measure_rss_distance`] against a prepared channel.
pub fn measure_rss_with<R: Rng + ?Sized>(
    channel: &Channel,
    true_distance: f64,
    p_tx: f64,
    sigma_db: f64,
    rng: &mut R,
) -> Result<f64, RangingError> {
    let p_rx = channel.received_power_dbm(p_tx, true_distance)?;
    let noise = if sigma_db > 0.0 { sigma_db * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
    invert_received_power(channel, p_tx, p_rx + noise)
}
