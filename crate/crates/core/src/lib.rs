//! Monte Carlo simulation of two-way time-of-flight localization for
//! energy-harvesting nanonodes in the terahertz band.

// Negated float comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod channel;
pub mod config;
pub mod energy;
pub mod localization;
pub mod metrics;
pub mod ranging;
pub mod rng;
pub mod simulator;
pub mod topology;

pub use config::{load_config, ConfigError, SimConfig};
pub use metrics::MetricsSummary;
pub use simulator::{run_experiment, Experiment, Simulation};
