//! Simulated resource costs.
//!
//! Communication counts one download and one upload of the full parameter
//! vector per selected client. Computation is a linear per-sample-epoch
//! energy model; it is a declared stand-in for measured device energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub joules_per_sample_epoch: f64,
    #[serde(default = "default_bytes_per_param")]
    pub bytes_per_param: u64,
    #[serde(default)]
    pub overhead_bytes_per_message: u64,
}

fn default_bytes_per_param() -> u64 {
    4
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            joules_per_sample_epoch: 0.01,
            bytes_per_param: 4,
            overhead_bytes_per_message: 0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.joules_per_sample_epoch > 0.0 && self.joules_per_sample_epoch.is_finite()) {
            return Err(Error::field("cost.joules_per_sample_epoch", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceTotals {
    pub energy_j: f64,
    pub bytes: u64,
    pub rounds: usize,
}

impl ResourceTotals {
    pub fn add_round(&mut self, energy_j: f64, bytes: u64) {
        self.energy_j += energy_j;
        self.bytes += bytes;
        self.rounds += 1;
    }
}

/// Bytes moved in one round: every selected client downloads the global
/// model and uploads its update.
pub fn round_bandwidth(per_round: usize, param_count: usize, cm: &CostModel) -> u64 {
    let p = per_round as u64;
    2 * p * param_count as u64 * cm.bytes_per_param + 2 * p * cm.overhead_bytes_per_message
}

/// Energy for local training of the selected clients, given their sample
/// counts.
pub fn round_energy(sample_counts: &[usize], local_epochs: usize, cm: &CostModel) -> f64 {
    sample_counts
        .iter()
        .map(|&n| cm.joules_per_sample_epoch * local_epochs as f64 * n as f64)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    /// accuracy per joule
    pub computation: f64,
    /// accuracy per byte
    pub communication: f64,
}

pub fn efficiency(final_accuracy: f64, totals: &ResourceTotals) -> Result<Efficiency> {
    if totals.energy_j <= 0.0 || totals.bytes == 0 {
        return Err(Error::UndefinedEfficiency);
    }
    Ok(Efficiency {
        computation: final_accuracy / totals.energy_j,
        communication: final_accuracy / totals.bytes as f64,
    })
}
