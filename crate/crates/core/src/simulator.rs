//! Monte Carlo driver: one localization round per node per iteration.
//!
//! Every random draw comes from a substream keyed by the master seed, the
//! iteration, the node and the draw's purpose, so results do not depend on
//! the worker count and sweep points can share random numbers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::channel::{link_ok, Channel, ChannelError, SPEED_OF_LIGHT};
use crate::config::ConfigError;
pub use crate::config::SimConfig;
use crate::energy::{self, ConsumptionProfile, HarvesterParams, Phase};
use crate::localization::{self, AnchorSet, LocationEstimate};
use crate::metrics::{Accumulator, MetricsError, MetricsSummary};
use crate::ranging::{self, Bearing, TsookParams, MIN_RANGE};
use crate::rng::{derive_seed, substream, Purpose, ITERATION_SCOPE};
use crate::topology::{displace_node, Position3, Topology};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    EnergyDepleted,
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeOutcome {
    pub node: usize,
    pub true_position: Position3,
    pub result: Result<LocationEstimate, FailureCause>,
}

impl NodeOutcome {
    pub fn error(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|est| localization::localization_error(&self.true_position, est))
    }
}

/// Config-derived state shared by every iteration.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    topology: Topology,
    anchors: AnchorSet,
    channel: Channel,
    harvester: HarvesterParams,
    profile: ConsumptionProfile,
    noise_std: f64,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let topology = config.topology()?;
        let noise_std = if config.ranging_noise {
            ranging::tof_noise_std(config.bandwidth)
                .map_err(|e| ConfigError::Invalid { field: "bandwidth".into(), reason: e.to_string() })?
        } else {
            0.0
        };
        Ok(Self {
            anchors: AnchorSet::exact(topology.anchor_positions.clone()),
            channel: Channel::new(config.channel_params())?,
            harvester: config.harvester(),
            profile: config.consumption(),
            config: config.clone(),
            topology,
            noise_std,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Anchor set for one iteration, with the controllers' reporting error applied.
    pub fn anchors_for(&self, iteration: u64) -> AnchorSet {
        let mut rng = substream(self.config.master_seed, iteration, ITERATION_SCOPE, Purpose::AnchorError);
        localization::inject_anchor_error(&self.anchors, self.config.anchor_error_sigma, &mut rng)
    }

    fn position(&self, iteration: u64, node: usize) -> Position3 {
        let mut rng = substream(self.config.master_seed, iteration, node as u64, Purpose::Mobility);
        displace_node(&self.topology.node_positions[node], self.topology.extent_d, self.config.mobility, &mut rng)
    }

    fn in_range(&self, d: f64) -> bool {
        // both directions see the same reciprocal channel and transmit power
        match self.channel.received_power_dbm(self.config.p_tx_dbm, d.max(MIN_RANGE)) {
            Ok(p_rx) => link_ok(p_rx, self.config.sensitivity_dbm),
            Err(_) => false,
        }
    }

    /// Spends the pre-ranging phases. Returns the node's energy state when it
    /// is still on afterwards.
    fn prepare_energy(&self, iteration: u64, node: usize) -> Option<energy::EnergyState> {
        let c = &self.config;
        let seed = c.master_seed;
        let mut rng = substream(seed, iteration, node as u64, Purpose::InitialEnergy);
        let mut state = c.energy_state(rand::Rng::gen_range(&mut rng, 0.0..=c.e_max));
        let mut rng = substream(seed, iteration, node as u64, Purpose::Harvest);
        energy::harvest(&mut state, c.update_period, &self.harvester, &mut rng);
        let mut rng = substream(seed, iteration, node as u64, Purpose::Packet);
        for phase in [Phase::Operational, Phase::Announcement] {
            let cost = energy::phase_cost(&self.profile, phase, self.anchors.len(), c.k_pulses, &mut rng);
            state.consume(cost).ok()?;
        }
        Some(state)
    }

    /// One node's localization round. The first failure encountered decides the cause.
    pub fn locate_node(&self, iteration: u64, node: usize, anchors: &AnchorSet) -> NodeOutcome {
        let c = &self.config;
        let true_position = self.position(iteration, node);
        let outcome = |result| NodeOutcome { node, true_position, result };

        let mut state = if c.energy_accounting {
            match self.prepare_energy(iteration, node) {
                Some(s) => Some(s),
                None => return outcome(Err(FailureCause::EnergyDepleted)),
            }
        } else {
            None
        };

        let exchange = energy::ranging_exchange_cost(&self.profile, c.k_pulses);
        let mut rng = substream(c.master_seed, iteration, node as u64, Purpose::Ranging);
        let mut ranges = Vec::with_capacity(anchors.len());
        for anchor in &anchors.positions {
            let d = (true_position - anchor).norm();
            // drawn before the checks so every anchor consumes the same draws
            let estimate = ranging::noisy_range(d, self.noise_std, c.k_pulses, &mut rng).max(MIN_RANGE);
            if !self.in_range(d) {
                return outcome(Err(FailureCause::OutOfRange));
            }
            if let Some(s) = state.as_mut() {
                if s.consume(exchange).is_err() {
                    return outcome(Err(FailureCause::EnergyDepleted));
                }
            }
            ranges.push(estimate);
        }
        let estimate = localization::trilaterate(anchors, &ranges)
            .expect("validated anchor layouts are never collinear and ranges are positive");
        outcome(Ok(estimate))
    }

    pub fn run_iteration(&self, iteration: u64) -> Vec<NodeOutcome> {
        let anchors = self.anchors_for(iteration);
        (0..self.topology.node_positions.len()).map(|node| self.locate_node(iteration, node, &anchors)).collect()
    }

    fn accumulate(&self, iteration: u64) -> Accumulator {
        let mut acc = Accumulator::default();
        for outcome in self.run_iteration(iteration) {
            match (&outcome.result, outcome.error()) {
                (Ok(_), Some(e)) => acc.record_success(e),
                (Err(FailureCause::EnergyDepleted), _) => acc.record_energy_failure(),
                _ => acc.record_range_failure(),
            }
        }
        acc
    }

    /// Runs every iteration on `workers` threads (0 lets the pool decide).
    pub fn run(&self, workers: usize) -> Result<Experiment, SimError> {
        let per_iteration = with_pool(workers, || {
            (0..self.config.iterations).into_par_iter().map(|i| self.accumulate(i)).collect::<Vec<_>>()
        })?;
        let mut total = Accumulator::default();
        for acc in per_iteration {
            total.merge(acc);
        }
        Ok(Experiment { summary: total.summarize()?, samples: total.errors })
    }

    /// ToF, AoA and RSS localization on identical geometry and seeds with
    /// energy accounting off.
    pub fn compare(&self, workers: usize) -> Result<Comparison, SimError> {
        let per_iteration = with_pool(workers, || {
            (0..self.config.iterations).into_par_iter().map(|i| self.compare_iteration(i)).collect::<Vec<_>>()
        })?;
        let mut totals: [Accumulator; 3] = Default::default();
        for accs in per_iteration {
            for (total, acc) in totals.iter_mut().zip(accs) {
                total.merge(acc);
            }
        }
        let [tof, aoa, rss] = totals;
        Ok(Comparison { tof: tof.summarize()?, aoa: aoa.summarize()?, rss: rss.summarize()? })
    }

    fn compare_iteration(&self, iteration: u64) -> [Accumulator; 3] {
        let c = &self.config;
        let anchors = self.anchors_for(iteration);
        let sigma_aoa = c.aoa_sigma_deg.to_radians();
        let mut accs: [Accumulator; 3] = Default::default();
        for node in 0..self.topology.node_positions.len() {
            let p = self.position(iteration, node);
            let distances: Vec<f64> = anchors.positions.iter().map(|a| (p - a).norm()).collect();
            if !distances.iter().all(|&d| self.in_range(d)) {
                accs.iter_mut().for_each(Accumulator::record_range_failure);
                continue;
            }
            let seed = c.master_seed;
            let mut rng = substream(seed, iteration, node as u64, Purpose::Ranging);
            let tof: Vec<f64> = distances
                .iter()
                .map(|&d| ranging::noisy_range(d, self.noise_std, c.k_pulses, &mut rng).max(MIN_RANGE))
                .collect();
            let mut rng = substream(seed, iteration, node as u64, Purpose::Bearing);
            let bearings: Vec<Bearing> = anchors
                .positions
                .iter()
                .map(|a| ranging::measure_aoa(Bearing::towards(a, &p), sigma_aoa, &mut rng))
                .collect();
            let mut rng = substream(seed, iteration, node as u64, Purpose::Rss);
            let rss: Vec<f64> = distances
                .iter()
                .map(|&d| {
                    ranging::measure_rss_with(&self.channel, d.max(MIN_RANGE), c.p_tx_dbm, c.rss_sigma_db, &mut rng)
                        .expect("distance is positive and the channel validated")
                })
                .collect();

            let results = [
                localization::trilaterate(&anchors, &tof),
                localization::aoa_triangulate(&anchors, &bearings),
                localization::rss_trilaterate(&anchors, &rss),
            ];
            for (acc, result) in accs.iter_mut().zip(results) {
                match result {
                    Ok(est) => acc.record_success(localization::localization_error(&p, &est)),
                    Err(_) => acc.record_range_failure(),
                }
            }
        }
        accs
    }
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, SimError> {
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| SimError::Pool(e.to_string()))?;
    Ok(pool.install(job))
}

/// Aggregated result of one experiment. `samples` holds the per-success
/// errors in iteration then node order.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub summary: MetricsSummary,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub tof: MetricsSummary,
    pub aoa: MetricsSummary,
    pub rss: MetricsSummary,
}

pub fn run_iteration(config: &SimConfig, iteration: u64) -> Result<Vec<NodeOutcome>, SimError> {
    Ok(Simulation::new(config)?.run_iteration(iteration))
}

pub fn run_experiment(config: &SimConfig, workers: usize) -> Result<Experiment, SimError> {
    Simulation::new(config)?.run(workers)
}

pub fn compare(config: &SimConfig, workers: usize) -> Result<Comparison, SimError> {
    let config = SimConfig { energy_accounting: false, ..config.clone() };
    Simulation::new(&config)?.compare(workers)
}

/// How sweep points pick their master seed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// A distinct seed per point derived from the base seed and the point index.
    #[default]
    Fresh,
    /// Every point reuses the base seed (common random numbers).
    Common,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis: String,
    pub value: Value,
    pub seed: u64,
    pub experiment: Experiment,
}

pub fn sweep_seed(base_seed: u64, index: usize, policy: SeedPolicy) -> u64 {
    match policy {
        SeedPolicy::Fresh => derive_seed(base_seed, index as u64),
        SeedPolicy::Common => base_seed,
    }
}

/// Runs `base` once per value of `axis`. Every point is validated before any runs.
pub fn sweep(
    base: &SimConfig,
    axis: &str,
    values: &[Value],
    policy: SeedPolicy,
    workers: usize,
) -> Result<Vec<SweepPoint>, SimError> {
    let configs = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut c = base.with_field(axis, v.clone())?;
            c.master_seed = sweep_seed(base.master_seed, i, policy);
            Ok(c)
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    configs
        .into_iter()
        .zip(values)
        .map(|(c, v)| {
            Ok(SweepPoint {
                axis: axis.to_owned(),
                value: v.clone(),
                seed: c.master_seed,
                experiment: run_experiment(&c, workers)?,
            })
        })
        .collect()
}

/// Time to localize `m` nodes against `n` anchors with `k` pulses each.
pub fn latency_model(m: u64, n: u64, k: u64, t_tof: f64, t_tr: f64) -> f64 {
    m as f64 * (n as f64 * k as f64 * t_tof + t_tr)
}

/// Round-trip time over `max_distance` plus the sender's and responder's pulse slots.
pub fn estimate_t_tof(params: &TsookParams, max_distance: f64) -> f64 {
    2.0 * max_distance / SPEED_OF_LIGHT + 2.0 * params.beta * params.pulse_duration
}
