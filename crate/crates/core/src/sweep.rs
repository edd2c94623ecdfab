//! Early-stopping threshold sweeps.
//!
//! Runs with the same seed follow identical trajectories until the
//! stopping rule fires, so raising ψ can only delay the stop.

use serde::{Deserialize, Serialize};

use crate::accounting::efficiency;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::orchestrator::{run_experiment, ExperimentSetup, StrategyKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub psi: f64,
    /// Equals T when the criterion never fired.
    pub stop_round: usize,
    pub triggered: bool,
    pub final_accuracy: f64,
    pub comp_eff: Option<f64>,
    pub comm_eff: Option<f64>,
}

pub fn sweep_psi(cfg: &ExperimentConfig, psi_values: &[f64], label_override: Option<&str>) -> Result<Vec<SweepRow>> {
    let setup = cfg.build_setup(label_override)?;
    sweep_setup(&setup, psi_values)
}

pub fn sweep_setup(setup: &ExperimentSetup, psi_values: &[f64]) -> Result<Vec<SweepRow>> {
    if psi_values.is_empty() {
        return Err(Error::field("--values", "at least one threshold is required"));
    }
    psi_values
        .iter()
        .map(|&psi| {
            let mut s = setup.clone();
            s.early_stop.threshold = psi;
            s.early_stop.enabled = true;
            let out = run_experiment(&s, StrategyKind::Flrce)?;
            let eff = efficiency(out.final_accuracy, &out.totals).ok();
            Ok(SweepRow {
                psi,
                stop_round: out.stop_round,
                triggered: out.stopped_early,
                final_accuracy: out.final_accuracy,
                comp_eff: eff.map(|e| e.computation),
                comm_eff: eff.map(|e| e.communication),
            })
        })
        .collect()
}

/// CSV rendering: psi, stop_round, triggered, final_accuracy, comp_eff,
/// comm_eff. Rows that never triggered show `N/A` in `triggered`.
pub fn render_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["psi", "stop_round", "triggered", "final_accuracy", "comp_eff", "comm_eff"])?;
    for r in rows {
        w.write_record([
            r.psi.to_string(),
            r.stop_round.to_string(),
            if r.triggered { "yes".into() } else { "N/A".into() },
            r.final_accuracy.to_string(),
            r.comp_eff.map(|v| v.to_string()).unwrap_or_default(),
            r.comm_eff.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::config(e.to_string()))
}
