//! Experiment configuration.
//!
//! A config file is a flat JSON object whose keys are [`SimConfig`] field
//! names, in SI units. Absent keys take the reference defaults; unknown keys
//! and out-of-range values are rejected with the offending field named.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::channel::{AbsorptionTable, ChannelParams};
use crate::energy::{ConsumptionProfile, EnergyState, HarvestSource, HarvesterParams, ProfileKind};
use crate::ranging::TsookParams;
use crate::topology::{self, AnchorScheme, MobilityPattern, Topology};

/// Upper bound on the band integration resolution.
pub const MAX_SUBBANDS: usize = 65_536;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Malformed(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.to_owned(), reason: reason.into() }
    }

    /// Field the error refers to, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey(k) => Some(k),
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Distance between neighbouring nanonodes, m.
    pub spacing: f64,
    /// Harvester generator voltage, V.
    pub generator_voltage: f64,
    /// Energy to receive one TS-OOK pulse, J.
    pub e_rx_pulse: f64,
    /// Energy to transmit one TS-OOK pulse, J.
    pub e_tx_pulse: f64,
    /// Capacitor storage capacity, J.
    pub e_max: f64,
    pub turn_off_threshold: f64,
    pub turn_on_threshold: f64,
    pub harvester_source: HarvestSource,
    /// Harvesting cycle, s. Defaults to the value for `harvester_source`.
    pub t_cycle: Option<f64>,
    /// Charge per harvesting cycle, C.
    pub delta_q_mean: f64,
    pub delta_q_std: f64,
    pub p_tx_dbm: f64,
    pub packet_bits: u32,
    /// Operational bandwidth, Hz. Sets both the band and the ranging noise.
    pub bandwidth: f64,
    pub sensitivity_dbm: f64,
    /// Center frequency, Hz.
    pub frequency: f64,
    pub env_attenuation_db: f64,
    pub n_subbands: usize,
    pub absorption_table: AbsorptionTable,
    pub iterations: u64,
    /// Time between localization rounds, s.
    pub update_period: f64,
    pub mobility: MobilityPattern,
    pub anchor_count: usize,
    pub anchor_scheme: AnchorScheme,
    pub k_pulses: u32,
    pub consumption_profile: ProfileKind,
    /// Per-axis std of the controllers' reported positions, m.
    pub anchor_error_sigma: f64,
    /// TS-OOK pulse duration, s.
    pub pulse_duration: f64,
    pub beta: f64,
    /// Add raw-resolution noise to ToF ranges.
    pub ranging_noise: bool,
    /// Track harvesting and consumption; when off every node can always range.
    pub energy_accounting: bool,
    pub aoa_sigma_deg: f64,
    pub rss_sigma_db: f64,
    pub master_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid_rows: 25,
            grid_cols: 25,
            spacing: 9e-3,
            generator_voltage: 0.42,
            e_rx_pulse: 0.1e-12,
            e_tx_pulse: 1.0e-12,
            e_max: 800e-12,
            turn_off_threshold: 10e-12,
            turn_on_threshold: 10e-12,
            harvester_source: HarvestSource::AirVibration,
            t_cycle: None,
            delta_q_mean: 6e-12,
            delta_q_std: 0.6e-12,
            p_tx_dbm: -20.0,
            packet_bits: 8,
            bandwidth: 1e12,
            sensitivity_dbm: -110.0,
            frequency: 1e12,
            env_attenuation_db: 0.0,
            n_subbands: 64,
            absorption_table: AbsorptionTable::default(),
            iterations: 1000,
            update_period: 0.1,
            mobility: MobilityPattern::RandomBox,
            anchor_count: 4,
            anchor_scheme: AnchorScheme::Corners,
            k_pulses: 1,
            consumption_profile: ProfileKind::ReceiveOnly,
            anchor_error_sigma: 0.0,
            pulse_duration: 100e-15,
            beta: 1000.0,
            ranging_noise: true,
            energy_accounting: true,
            aoa_sigma_deg: 0.75,
            rss_sigma_db: 0.3,
            master_seed: 1,
        }
    }
}

fn default_object() -> Map<String, Value> {
    match serde_json::to_value(SimConfig::default()) {
        Ok(Value::Object(map)) => map,
        _ => unreachable!("SimConfig serializes to an object"),
    }
}

impl SimConfig {
    /// Names of every configurable field.
    pub fn field_names() -> Vec<String> {
        default_object().keys().cloned().collect()
    }

    /// Parses a flat JSON object. Whitespace-only input yields the defaults.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))?;
        let Value::Object(overrides) = value else {
            return Err(ConfigError::Malformed("top level must be an object".into()));
        };
        let config = Self::default().with_fields(overrides)?;
        config.validate()?;
        Ok(config)
    }

    /// Applies field overrides one at a time so type errors name their field.
    pub fn with_fields(&self, overrides: Map<String, Value>) -> Result<Self, ConfigError> {
        let Value::Object(mut merged) =
            serde_json::to_value(self).map_err(|e| ConfigError::Malformed(e.to_string()))?
        else {
            unreachable!("SimConfig serializes to an object");
        };
        for (key, value) in overrides {
            if !merged.contains_key(&key) {
                return Err(ConfigError::UnknownKey(key));
            }
            let previous = merged.insert(key.clone(), value);
            if let Err(e) = serde_json::from_value::<SimConfig>(Value::Object(merged.clone())) {
                return Err(ConfigError::invalid(&key, e.to_string()));
            }
            debug_assert!(previous.is_some());
        }
        serde_json::from_value(Value::Object(merged)).map_err(|e| ConfigError::Malformed(e.to_string()))
    }

    /// Copy with a single field replaced; used for sweeps and CLI overrides.
    pub fn with_field(&self, name: &str, value: Value) -> Result<Self, ConfigError> {
        let mut map = Map::new();
        map.insert(name.to_owned(), value);
        let config = self.with_fields(map)?;
        config.validate()?;
        Ok(config)
    }

    pub fn t_cycle(&self) -> f64 {
        self.t_cycle.unwrap_or_else(|| self.harvester_source.default_cycle())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("must be positive and finite, got {v}")))
            }
        };
        let non_negative = |field: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("must be non-negative and finite, got {v}")))
            }
        };
        let finite = |field: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("must be finite, got {v}")))
            }
        };
        let at_least = |field: &str, v: u64, min: u64| {
            if v >= min {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("must be at least {min}, got {v}")))
            }
        };

        at_least("grid_rows", self.grid_rows as u64, 1)?;
        at_least("grid_cols", self.grid_cols as u64, 1)?;
        positive("spacing", self.spacing)?;
        positive("generator_voltage", self.generator_voltage)?;
        non_negative("e_rx_pulse", self.e_rx_pulse)?;
        non_negative("e_tx_pulse", self.e_tx_pulse)?;
        positive("e_max", self.e_max)?;
        for (field, v) in
            [("turn_off_threshold", self.turn_off_threshold), ("turn_on_threshold", self.turn_on_threshold)]
        {
            non_negative(field, v)?;
            if v > self.e_max {
                return Err(ConfigError::invalid(field, format!("exceeds e_max ({} J)", self.e_max)));
            }
        }
        if self.turn_on_threshold < self.turn_off_threshold {
            return Err(ConfigError::invalid(
                "turn_on_threshold",
                format!("must not be below turn_off_threshold ({} J)", self.turn_off_threshold),
            ));
        }
        if let Some(t) = self.t_cycle {
            positive("t_cycle", t)?;
        }
        positive("delta_q_mean", self.delta_q_mean)?;
        non_negative("delta_q_std", self.delta_q_std)?;
        finite("p_tx_dbm", self.p_tx_dbm)?;
        at_least("packet_bits", self.packet_bits as u64, 1)?;
        positive("frequency", self.frequency)?;
        positive("bandwidth", self.bandwidth)?;
        if self.bandwidth >= 2.0 * self.frequency {
            return Err(ConfigError::invalid("bandwidth", "must be below twice the center frequency"));
        }
        finite("sensitivity_dbm", self.sensitivity_dbm)?;
        non_negative("env_attenuation_db", self.env_attenuation_db)?;
        at_least("n_subbands", self.n_subbands as u64, 1)?;
        if self.n_subbands > MAX_SUBBANDS {
            return Err(ConfigError::invalid("n_subbands", format!("at most {MAX_SUBBANDS} sub-bands are supported")));
        }
        at_least("iterations", self.iterations, 1)?;
        non_negative("update_period", self.update_period)?;
        at_least("anchor_count", self.anchor_count as u64, 4)?;
        if self.anchor_count > 9 {
            return Err(ConfigError::invalid("anchor_count", "the corners scheme supports at most 9 anchors"));
        }
        at_least("k_pulses", self.k_pulses as u64, 1)?;
        non_negative("anchor_error_sigma", self.anchor_error_sigma)?;
        positive("pulse_duration", self.pulse_duration)?;
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(ConfigError::invalid("beta", format!("must be at least 1, got {}", self.beta)));
        }
        non_negative("aoa_sigma_deg", self.aoa_sigma_deg)?;
        non_negative("rss_sigma_db", self.rss_sigma_db)?;
        if self.mobility != MobilityPattern::None && self.grid_cols < 2 {
            return Err(ConfigError::invalid("mobility", "needs a grid at least two columns wide"));
        }
        Ok(())
    }

    pub fn topology(&self) -> Result<Topology, ConfigError> {
        let grid = topology::build_grid(self.grid_rows, self.grid_cols, self.spacing)
            .map_err(|e| ConfigError::invalid("spacing", e.to_string()))?;
        topology::place_anchors(grid, self.anchor_count, self.anchor_scheme)
            .map_err(|e| ConfigError::invalid("anchor_count", e.to_string()))
    }

    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            center_frequency: self.frequency,
            bandwidth: self.bandwidth,
            env_attenuation_db: self.env_attenuation_db,
            absorption: self.absorption_table.clone(),
            n_subbands: self.n_subbands,
        }
    }

    pub fn harvester(&self) -> HarvesterParams {
        HarvesterParams {
            source: self.harvester_source,
            t_cycle: self.t_cycle(),
            delta_q_mean: self.delta_q_mean,
            delta_q_std: self.delta_q_std,
            generator_voltage: self.generator_voltage,
        }
    }

    pub fn consumption(&self) -> ConsumptionProfile {
        ConsumptionProfile {
            kind: self.consumption_profile,
            packet_bits: self.packet_bits,
            e_rx_pulse: self.e_rx_pulse,
            e_tx_pulse: self.e_tx_pulse,
        }
    }

    pub fn tsook(&self) -> TsookParams {
        TsookParams { pulse_duration: self.pulse_duration, beta: self.beta, k_pulses: self.k_pulses }
    }

    /// Energy state of a node holding `energy` joules under this config.
    pub fn energy_state(&self, energy: f64) -> EnergyState {
        EnergyState::new(
            energy.clamp(0.0, self.e_max),
            self.e_max,
            self.generator_voltage,
            self.turn_off_threshold,
            self.turn_on_threshold,
        )
        .expect("validated config yields a valid energy state")
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    SimConfig::from_json_str(&text)
}
