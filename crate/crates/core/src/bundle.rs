//! Results bundles: the JSON document written by `flrce run`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::accounting::{efficiency, Efficiency, ResourceTotals};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::orchestrator::{run_experiment, ExperimentSetup, RoundRecord, RunOutcome, StrategyKind};

/// Bumped whenever the JSON layout changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const BUNDLE_FILE: &str = "results.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsBundle {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub param_count: usize,
    pub client_sizes: Vec<usize>,
    pub strategies: Vec<StrategyResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: StrategyKind,
    pub stop_round: usize,
    pub stopped_early: bool,
    pub final_accuracy: f64,
    pub totals: ResourceTotals,
    pub efficiency: Option<Efficiency>,
    pub rounds: Vec<RoundRecord>,
    /// Ω at the end of the run, one row per client.
    pub omega: Vec<Vec<f64>>,
    pub heuristics: Vec<f64>,
}

impl StrategyResult {
    pub fn from_outcome(outcome: &RunOutcome) -> Self {
        StrategyResult {
            strategy: outcome.strategy,
            stop_round: outcome.stop_round,
            stopped_early: outcome.stopped_early,
            final_accuracy: outcome.final_accuracy,
            totals: outcome.totals,
            efficiency: efficiency(outcome.final_accuracy, &outcome.totals).ok(),
            rounds: outcome.records.clone(),
            omega: outcome.maps.omega.rows(),
            heuristics: outcome.maps.heuristics.values().to_vec(),
        }
    }

    /// Final accuracy divided by rounds run.
    pub fn accuracy_per_round(&self) -> f64 {
        if self.stop_round == 0 {
            0.0
        } else {
            self.final_accuracy / self.stop_round as f64
        }
    }
}

/// Runs every configured strategy, sequentially and in the listed order.
pub fn run_config(cfg: &ExperimentConfig, label_override: Option<&str>) -> Result<ResultsBundle> {
    let setup = cfg.build_setup(label_override)?;
    run_setup(cfg, &setup)
}

pub fn run_setup(cfg: &ExperimentConfig, setup: &ExperimentSetup) -> Result<ResultsBundle> {
    let strategies = cfg
        .strategies
        .iter()
        .map(|&s| run_experiment(setup, s).map(|o| StrategyResult::from_outcome(&o)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultsBundle {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        param_count: setup.model.param_count(),
        client_sizes: setup.clients.iter().map(|c| c.len()).collect(),
        strategies,
    })
}

impl ResultsBundle {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: ResultsBundle = serde_json::from_str(text)?;
        if bundle.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported results schema version {} (expected {SCHEMA_VERSION})",
                bundle.schema_version
            )));
        }
        Ok(bundle)
    }

    pub fn strategy(&self, kind: StrategyKind) -> Option<&StrategyResult> {
        self.strategies.iter().find(|s| s.strategy == kind)
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(BUNDLE_FILE);
        std::fs::write(&path, self.to_json()?).map_err(|e| Error::io(&path, e))
    }
}
