//! Nanonode energy: piezoelectric harvesting into a capacitor, TS-OOK pulse
//! consumption and the turn-off / turn-on lifecycle.
//!
//! The capacitor charges exponentially in the number of compress-and-release
//! cycles `n`: `E(n) = E_max (1 - exp(-n dQ / (V_g C)))^2` with
//! `C = 2 E_max / V_g^2`. To harvest one cycle from an arbitrary energy level
//! the level is first mapped back to its (ceiled) cycle index and then moved
//! one cycle forward.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PICOJOULE: f64 = 1e-12;
pub const PICOCOULOMB: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("{name} must be positive and finite (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("energy must be non-negative (got {0} J)")]
    NegativeEnergy(f64),
    #[error("turn-on threshold {on} J is below turn-off threshold {off} J")]
    InvertedThresholds { off: f64, on: f64 },
    #[error("{name} must lie within [0, E_max] (got {value} J)")]
    OutOfCapacity { name: &'static str, value: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<f64, EnergyError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(EnergyError::NonPositive { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarvestSource {
    AirVibration,
    RfPower,
}

impl HarvestSource {
    /// Literature value for the compress-and-release cycle duration.
    pub fn default_cycle(self) -> f64 {
        match self {
            HarvestSource::AirVibration => 20e-3,
            HarvestSource::RfPower => 1.71e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarvesterParams {
    pub source: HarvestSource,
    pub t_cycle: f64,
    pub delta_q_mean: f64,
    pub delta_q_std: f64,
    pub generator_voltage: f64,
}

impl HarvesterParams {
    pub fn validate(&self) -> Result<(), EnergyError> {
        positive("t_cycle", self.t_cycle)?;
        positive("delta_q_mean", self.delta_q_mean)?;
        positive("generator_voltage", self.generator_voltage)?;
        if !(self.delta_q_std >= 0.0 && self.delta_q_std.is_finite()) {
            return Err(EnergyError::NonPositive { name: "delta_q_std", value: self.delta_q_std });
        }
        Ok(())
    }
}

/// `C_cap = 2 E_max / V_g^2`.
pub fn capacitance(e_max: f64, v_g: f64) -> Result<f64, EnergyError> {
    let e_max = positive("e_max", e_max)?;
    let v_g = positive("generator_voltage", v_g)?;
    Ok(2.0 * e_max / (v_g * v_g))
}

/// Stored energy of one nanonode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyState {
    pub energy: f64,
    pub capacity: f64,
    pub capacitance: f64,
    pub is_on: bool,
    pub turn_off_threshold: f64,
    pub turn_on_threshold: f64,
}

/// Cost could not be paid without dropping below the turn-off threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("nanonode energy depleted")]
pub struct Depleted;

/// Where an energy level sits on the charging curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleIndex {
    Cycle(u64),
    /// At or above capacity; no further harvesting is possible.
    Saturated,
}

impl EnergyState {
    /// A node holding `energy`, switched on iff it has reached the turn-on threshold.
    pub fn new(
        energy: f64,
        capacity: f64,
        generator_voltage: f64,
        turn_off_threshold: f64,
        turn_on_threshold: f64,
    ) -> Result<Self, EnergyError> {
        let capacitance = capacitance(capacity, generator_voltage)?;
        if !(energy >= 0.0) {
            return Err(EnergyError::NegativeEnergy(energy));
        }
        if energy > capacity {
            return Err(EnergyError::OutOfCapacity { name: "energy", value: energy });
        }
        for (name, value) in [("turn_off_threshold", turn_off_threshold), ("turn_on_threshold", turn_on_threshold)] {
            if !(0.0..=capacity).contains(&value) {
                return Err(EnergyError::OutOfCapacity { name, value });
            }
        }
        if turn_on_threshold < turn_off_threshold {
            return Err(EnergyError::InvertedThresholds { off: turn_off_threshold, on: turn_on_threshold });
        }
        Ok(Self {
            energy,
            capacity,
            capacitance,
            is_on: energy >= turn_on_threshold,
            turn_off_threshold,
            turn_on_threshold,
        })
    }

    /// Removes `amount` joules if the node is on and stays at or above the
    /// turn-off threshold. Otherwise nothing is charged and the node turns off.
    pub fn consume(&mut self, amount: f64) -> Result<(), Depleted> {
        debug_assert!(amount >= 0.0);
        if self.is_on && self.energy - amount >= self.turn_off_threshold {
            self.energy = (self.energy - amount).max(0.0);
            Ok(())
        } else {
            self.is_on = false;
            Err(Depleted)
        }
    }
}

/// Ceiled cycle index of energy level `e` on the charging curve for charge `delta_q`.
pub fn cycle_index(e: f64, state: &EnergyState, delta_q: f64, v_g: f64) -> Result<CycleIndex, EnergyError> {
    if !(e >= 0.0) {
        return Err(EnergyError::NegativeEnergy(e));
    }
    positive("delta_q", delta_q)?;
    if e >= state.capacity {
        return Ok(CycleIndex::Saturated);
    }
    let fill = (2.0 * e / (state.capacitance * v_g * v_g)).sqrt();
    let n = (-v_g * state.capacitance / delta_q * (1.0 - fill).ln()).ceil();
    Ok(CycleIndex::Cycle(n.max(0.0) as u64))
}

/// Energy after `n` cycles of charge `delta_q` from empty, clamped to `[0, E_max]`.
pub fn energy_after_cycles(n: u64, state: &EnergyState, delta_q: f64, v_g: f64) -> f64 {
    let e_max = state.capacitance * v_g * v_g / 2.0;
    let charged = 1.0 - (-delta_q * n as f64 / (v_g * state.capacitance)).exp();
    (e_max * charged * charged).clamp(0.0, state.capacity)
}

/// Runs `floor(elapsed / t_cycle)` harvesting cycles, each with a fresh
/// `dQ ~ Normal(mean, std)` truncated at zero.
pub fn harvest<R: Rng + ?Sized>(state: &mut EnergyState, elapsed: f64, params: &HarvesterParams, rng: &mut R) {
    let cycles = whole_cycles(elapsed, params.t_cycle);
    let noise = Normal::new(0.0, params.delta_q_std).ok();
    for _ in 0..cycles {
        let delta_q = params.delta_q_mean + noise.map_or(0.0, |n| n.sample(rng));
        if delta_q <= 0.0 {
            continue;
        }
        match cycle_index(state.energy, state, delta_q, params.generator_voltage) {
            Ok(CycleIndex::Cycle(n)) => {
                let next = energy_after_cycles(n + 1, state, delta_q, params.generator_voltage);
                state.energy = next.max(state.energy);
            }
            Ok(CycleIndex::Saturated) | Err(_) => state.energy = state.energy.min(state.capacity),
        }
    }
    if !state.is_on && state.energy >= state.turn_on_threshold {
        state.is_on = true;
    }
}

/// Whole harvesting cycles that fit in `elapsed`; sub-cycle time is dropped.
pub fn whole_cycles(elapsed: f64, t_cycle: f64) -> u64 {
    if !(elapsed > 0.0) {
        return 0;
    }
    // tolerate representation error in ratios such as 0.1 / 0.02
    let ratio = elapsed / t_cycle;
    (ratio * (1.0 + 1e-12)).floor() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    ReceiveOnly,
    TransmitOnly,
    TransmitSensing,
    TransmitActuation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsumptionProfile {
    pub kind: ProfileKind,
    pub packet_bits: u32,
    pub e_rx_pulse: f64,
    pub e_tx_pulse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Operational,
    Announcement,
    Ranging,
}

/// Pulses received during the localization announcement codeword.
pub const ANNOUNCEMENT_PULSES: u32 = 3;

impl ConsumptionProfile {
    /// Expected cost of transmitting one packet (half its bits are pulses).
    pub fn expected_packet_tx(&self) -> f64 {
        self.packet_bits as f64 / 2.0 * self.e_tx_pulse
    }

    /// Fixed sensing or actuation surcharge on top of the packet.
    pub fn task_cost(&self) -> f64 {
        match self.kind {
            ProfileKind::ReceiveOnly | ProfileKind::TransmitOnly => 0.0,
            ProfileKind::TransmitSensing => self.expected_packet_tx() / 2.0,
            ProfileKind::TransmitActuation => self.expected_packet_tx(),
        }
    }

    /// Operational cost of a packet with `ones` pulse symbols; silences are free.
    pub fn operational_cost(&self, ones: u32) -> f64 {
        let per_pulse = match self.kind {
            ProfileKind::ReceiveOnly => self.e_rx_pulse,
            _ => self.e_tx_pulse,
        };
        ones as f64 * per_pulse + self.task_cost()
    }
}

/// Number of logical ones in a uniformly random packet.
pub fn draw_packet_ones<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> u32 {
    (0..bits).filter(|_| rng.gen::<bool>()).count() as u32
}

/// Energy drawn from the node by one phase of the update period.
pub fn phase_cost<R: Rng + ?Sized>(
    profile: &ConsumptionProfile,
    phase: Phase,
    n_anchors: usize,
    k_pulses: u32,
    rng: &mut R,
) -> f64 {
    match phase {
        Phase::Operational => profile.operational_cost(draw_packet_ones(profile.packet_bits, rng)),
        Phase::Announcement => ANNOUNCEMENT_PULSES as f64 * profile.e_rx_pulse,
        Phase::Ranging => n_anchors as f64 * ranging_exchange_cost(profile, k_pulses),
    }
}

/// One anchor exchange: receive and retransmit `k_pulses` pulses.
pub fn ranging_exchange_cost(profile: &ConsumptionProfile, k_pulses: u32) -> f64 {
    k_pulses as f64 * (profile.e_rx_pulse + profile.e_tx_pulse)
}
