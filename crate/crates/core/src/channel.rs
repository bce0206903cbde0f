//! THz link budget: spreading and molecular absorption loss, band averaging,
//! environment attenuation and the receiver sensitivity check.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive and finite (got {0} m)")]
    NonPositiveDistance(f64),
    #[error("frequency must be positive and finite (got {0} Hz)")]
    NonPositiveFrequency(f64),
    #[error("absorption coefficient must be non-negative (got {0} 1/m)")]
    NegativeAbsorption(f64),
    #[error("bandwidth must satisfy 0 < B < 2*f0 (got B = {bandwidth} Hz, f0 = {center} Hz)")]
    BadBandwidth { bandwidth: f64, center: f64 },
    #[error("environment attenuation must be non-negative (got {0} dB)")]
    NegativeAttenuation(f64),
    #[error("at least one sub-band is required")]
    NoSubbands,
}

#[derive(Debug, Error, PartialEq)]
#[error("absorption table line {line}: {reason}")]
pub struct TableParseError {
    pub line: usize,
    pub reason: String,
}

/// Medium absorption coefficient `k(f)` sampled at increasing frequencies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct AbsorptionTable {
    entries: Vec<(f64, f64)>,
}

impl AbsorptionTable {
    pub fn new(entries: Vec<(f64, f64)>) -> Result<Self, TableParseError> {
        for (i, &(f, k)) in entries.iter().enumerate() {
            let fail = |reason: String| Err(TableParseError { line: i + 1, reason });
            if !(f.is_finite() && f > 0.0) {
                return fail(format!("frequency {f} is not a positive finite number"));
            }
            if !(k.is_finite() && k >= 0.0) {
                return fail(format!("absorption {k} is not a non-negative finite number"));
            }
            if i > 0 && f <= entries[i - 1].0 {
                return fail(format!("frequency {f} does not increase over {}", entries[i - 1].0));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `k(f)` with linear interpolation, clamped outside the table; zero when empty.
    pub fn coefficient(&self, f: f64) -> f64 {
        let entries = &self.entries;
        match entries.len() {
            0 => 0.0,
            _ if f <= entries[0].0 => entries[0].1,
            n if f >= entries[n - 1].0 => entries[n - 1].1,
            _ => {
                let hi = entries.partition_point(|&(fe, _)| fe < f);
                let (f0, k0) = entries[hi - 1];
                let (f1, k1) = entries[hi];
                k0 + (k1 - k0) * (f - f0) / (f1 - f0)
            }
        }
    }
}

impl TryFrom<Vec<(f64, f64)>> for AbsorptionTable {
    type Error = TableParseError;

    fn try_from(entries: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(entries)
    }
}

impl From<AbsorptionTable> for Vec<(f64, f64)> {
    fn from(t: AbsorptionTable) -> Self {
        t.entries
    }
}

/// Plain-text table: one `frequency_hz k_per_m` pair per line, `#` starts a comment.
impl FromStr for AbsorptionTable {
    type Err = TableParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut entries = Vec::new();
        let mut lines = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(TableParseError { line, reason: format!("expected 2 columns, found {}", fields.len()) });
            }
            let num = |s: &str, what: &str| {
                s.parse::<f64>().map_err(|_| TableParseError { line, reason: format!("{what} {s:?} is not a number") })
            };
            entries.push((num(fields[0], "frequency")?, num(fields[1], "absorption")?));
            lines.push(line);
        }
        // report errors against file line numbers rather than entry indices
        AbsorptionTable::new(entries).map_err(|e| TableParseError { line: lines[e.line - 1], reason: e.reason })
    }
}

impl fmt::Display for AbsorptionTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (freq, k) in &self.entries {
            writeln!(f, "{freq:e} {k:e}")?;
        }
        Ok(())
    }
}

/// Convenience wrapper over [`AbsorptionTable::coefficient`].
pub fn absorption_coefficient(table: &AbsorptionTable, f: f64) -> f64 {
    table.coefficient(f)
}

/// Absorption plus spreading loss in dB at a single frequency.
pub fn path_loss_db(d: f64, f: f64, k: f64) -> Result<f64, ChannelError> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(ChannelError::NonPositiveDistance(d));
    }
    if !(f > 0.0 && f.is_finite()) {
        return Err(ChannelError::NonPositiveFrequency(f));
    }
    if !(k >= 0.0) {
        return Err(ChannelError::NegativeAbsorption(k));
    }
    Ok(k * d * 10.0 * E.log10() + 20.0 * (4.0 * PI * f * d / SPEED_OF_LIGHT).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub center_frequency: f64,
    pub bandwidth: f64,
    pub env_attenuation_db: f64,
    pub absorption: AbsorptionTable,
    pub n_subbands: usize,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let (f0, b) = (self.center_frequency, self.bandwidth);
        if !(f0 > 0.0 && f0.is_finite()) {
            return Err(ChannelError::NonPositiveFrequency(f0));
        }
        if !(b > 0.0 && b < 2.0 * f0) {
            return Err(ChannelError::BadBandwidth { bandwidth: b, center: f0 });
        }
        if !(self.env_attenuation_db >= 0.0 && self.env_attenuation_db.is_finite()) {
            return Err(ChannelError::NegativeAttenuation(self.env_attenuation_db));
        }
        if self.n_subbands == 0 {
            return Err(ChannelError::NoSubbands);
        }
        Ok(())
    }

    /// Center frequencies of the equal-width sub-bands covering `[f0 - B/2, f0 + B/2]`.
    pub fn subband_centers(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_subbands as f64;
        let lo = self.center_frequency - self.bandwidth / 2.0;
        (0..self.n_subbands).map(move |i| lo + self.bandwidth * (i as f64 + 0.5) / n)
    }
}

/// Band-averaged attenuation: the dB value of the mean linear power gain
/// over the sub-band centers.
pub fn band_attenuation_db(d: f64, params: &ChannelParams) -> Result<f64, ChannelError> {
    params.validate()?;
    let mut gain = 0.0;
    for f in params.subband_centers() {
        let loss = path_loss_db(d, f, params.absorption.coefficient(f))?;
        gain += 10f64.powf(-loss / 10.0);
    }
    Ok(-10.0 * (gain / params.n_subbands as f64).log10())
}

/// `P_rx = P_tx - band attenuation - A_ENV`, all in dB(m).
pub fn received_power_dbm(p_tx_dbm: f64, d: f64, params: &ChannelParams) -> Result<f64, ChannelError> {
    Ok(p_tx_dbm - band_attenuation_db(d, params)? - params.env_attenuation_db)
}

/// A signal is received when its power reaches the sensitivity (inclusive).
pub fn link_ok(p_rx_dbm: f64, sensitivity_dbm: f64) -> bool {
    p_rx_dbm >= sensitivity_dbm
}

/// Link budget with the sub-band grid resolved once, for the simulator hot path.
///
/// Gives the same numbers as [`received_power_dbm`] but evaluates the linear
/// gains directly, `(c / 4 pi f d)^2 * exp(-k d)`, without per-call logarithms.
#[derive(Debug, Clone)]
pub struct Channel {
    params: ChannelParams,
    /// `(1/f^2, k)` per sub-band.
    bands: Vec<(f64, f64)>,
    /// Sum of `1/f^2` when the medium is lossless.
    lossless_sum: Option<f64>,
}

impl Channel {
    pub fn new(params: ChannelParams) -> Result<Self, ChannelError> {
        params.validate()?;
        let bands: Vec<(f64, f64)> =
            params.subband_centers().map(|f| (1.0 / (f * f), params.absorption.coefficient(f))).collect();
        let lossless_sum = bands.iter().all(|&(_, k)| k == 0.0).then(|| bands.iter().map(|&(inv_f2, _)| inv_f2).sum());
        Ok(Self { params, bands, lossless_sum })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn attenuation_db(&self, d: f64) -> Result<f64, ChannelError> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(ChannelError::NonPositiveDistance(d));
        }
        let spread = (SPEED_OF_LIGHT / (4.0 * PI * d)).powi(2);
        let sum = match self.lossless_sum {
            Some(s) => s,
            None => self.bands.iter().map(|&(inv_f2, k)| inv_f2 * (-k * d).exp()).sum(),
        };
        Ok(-10.0 * (spread * sum / self.bands.len() as f64).log10())
    }

    pub fn received_power_dbm(&self, p_tx_dbm: f64, d: f64) -> Result<f64, ChannelError> {
        Ok(p_tx_dbm - self.attenuation_db(d)? - self.params.env_attenuation_db)
    }
}
