//! Boxplot descriptors of localization error and service availability.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no samples to summarize")]
    Empty,
    #[error("availability needs at least one attempt")]
    NoAttempts,
    #[error("{successes} successes out of {attempts} attempts")]
    TooManySuccesses { successes: u64, attempts: u64 },
}

/// Error distribution summary. Percentiles use linear interpolation between
/// closest ranks (position `p * (n - 1)` in the sorted sample).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: u64,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub p5: f64,
    pub p95: f64,
    /// Samples strictly outside `[p5, p95]`.
    #[serde(skip)]
    pub outliers: Vec<f64>,
}

/// Percentile of an ascending sample, `fraction` in `[0, 1]`.
pub fn percentile_sorted(sorted: &[f64], fraction: f64) -> f64 {
    let pos = fraction * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * w
    }
}

pub fn boxplot_stats(errors: &[f64]) -> Result<ErrorStats, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pct = |f| percentile_sorted(&sorted, f);
    let (p5, p95) = (pct(0.05), pct(0.95));
    // summed in sorted order so the mean does not depend on input order
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(ErrorStats {
        count: sorted.len() as u64,
        mean,
        median: pct(0.5),
        q1: pct(0.25),
        q3: pct(0.75),
        p5,
        p95,
        outliers: sorted.iter().copied().filter(|&e| e < p5 || e > p95).collect(),
    })
}

pub fn availability(successes: u64, attempts: u64) -> Result<f64, MetricsError> {
    if attempts == 0 {
        return Err(MetricsError::NoAttempts);
    }
    if successes > attempts {
        return Err(MetricsError::TooManySuccesses { successes, attempts });
    }
    Ok(successes as f64 / attempts as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCounts {
    pub energy_depleted: u64,
    pub out_of_range: u64,
}

impl FailureCounts {
    pub fn total(&self) -> u64 {
        self.energy_depleted + self.out_of_range
    }
}

/// Per sweep point summary. `errors` is absent when no attempt succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub attempts: u64,
    pub errors: Option<ErrorStats>,
    pub availability: f64,
    pub failures: FailureCounts,
}

impl MetricsSummary {
    pub fn successes(&self) -> u64 {
        self.errors.as_ref().map_or(0, |e| e.count)
    }
}

/// Running aggregate; merging is order-independent once finalized because
/// the sample is sorted before summarizing.
#[derive(Debug, Clone, Default)]
pub struct Accumulator {
    pub errors: Vec<f64>,
    pub attempts: u64,
    pub failures: FailureCounts,
}

impl Accumulator {
    pub fn record_success(&mut self, error: f64) {
        self.attempts += 1;
        self.errors.push(error);
    }

    pub fn record_energy_failure(&mut self) {
        self.attempts += 1;
        self.failures.energy_depleted += 1;
    }

    pub fn record_range_failure(&mut self) {
        self.attempts += 1;
        self.failures.out_of_range += 1;
    }

    pub fn merge(&mut self, other: Accumulator) {
        self.errors.extend(other.errors);
        self.attempts += other.attempts;
        self.failures.energy_depleted += other.failures.energy_depleted;
        self.failures.out_of_range += other.failures.out_of_range;
    }

    pub fn summarize(&self) -> Result<MetricsSummary, MetricsError> {
        let errors = match boxplot_stats(&self.errors) {
            Ok(stats) => Some(stats),
            Err(MetricsError::Empty) => None,
            Err(e) => return Err(e),
        };
        Ok(MetricsSummary {
            attempts: self.attempts,
            availability: availability(self.errors.len() as u64, self.attempts)?,
            errors,
            failures: self.failures,
        })
    }
}
