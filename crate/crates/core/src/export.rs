//! CSV tables behind the accuracy-per-round and efficiency plots.
//!
//! `accuracy.csv` columns: strategy, round, mode, mean_accuracy, conflicts,
//! es_triggered, energy_j, bytes.
//!
//! `efficiency.csv` columns: strategy, stop_round, stopped_early,
//! final_accuracy, energy_j, bytes, comp_eff, comm_eff, comp_eff_norm,
//! comm_eff_norm, accuracy_per_round. The `_norm` columns divide by the
//! largest value across strategies.

use std::path::{Path, PathBuf};

use crate::bundle::ResultsBundle;
use crate::error::{Error, Result};

pub const ACCURACY_FILE: &str = "accuracy.csv";
pub const EFFICIENCY_FILE: &str = "efficiency.csv";

const ACCURACY_HEADER: [&str; 8] = [
    "strategy",
    "round",
    "mode",
    "mean_accuracy",
    "conflicts",
    "es_triggered",
    "energy_j",
    "bytes",
];

const EFFICIENCY_HEADER: [&str; 11] = [
    "strategy",
    "stop_round",
    "stopped_early",
    "final_accuracy",
    "energy_j",
    "bytes",
    "comp_eff",
    "comm_eff",
    "comp_eff_norm",
    "comm_eff_norm",
    "accuracy_per_round",
];

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::config(format!("{other:?}")),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn accuracy_rows(bundle: &ResultsBundle) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for s in &bundle.strategies {
        for r in &s.rounds {
            rows.push(vec![
                s.strategy.to_string(),
                r.round.to_string(),
                serde_json::to_value(r.mode)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
                r.mean_accuracy.to_string(),
                opt(r.conflicts),
                r.es_triggered.to_string(),
                r.energy_j.to_string(),
                r.bytes.to_string(),
            ]);
        }
    }
    rows
}

pub fn efficiency_rows(bundle: &ResultsBundle) -> Vec<Vec<String>> {
    let max_of = |f: &dyn Fn(&crate::accounting::Efficiency) -> f64| {
        bundle
            .strategies
            .iter()
            .filter_map(|s| s.efficiency.as_ref().map(f))
            .fold(0.0_f64, f64::max)
    };
    let max_comp = max_of(&|e| e.computation);
    let max_comm = max_of(&|e| e.communication);
    let norm = |v: f64, max: f64| if max > 0.0 { Some(v / max) } else { None };

    bundle
        .strategies
        .iter()
        .map(|s| {
            let e = s.efficiency;
            vec![
                s.strategy.to_string(),
                s.stop_round.to_string(),
                s.stopped_early.to_string(),
                s.final_accuracy.to_string(),
                s.totals.energy_j.to_string(),
                s.totals.bytes.to_string(),
                opt(e.map(|e| e.computation)),
                opt(e.map(|e| e.communication)),
                opt(e.and_then(|e| norm(e.computation, max_comp))),
                opt(e.and_then(|e| norm(e.communication, max_comm))),
                s.accuracy_per_round().to_string(),
            ]
        })
        .collect()
}

type Table<'a> = (&'a str, &'a [&'a str], Vec<Vec<String>>);

/// Writes both CSV tables into `dir` and returns their paths.
pub fn export_plot_data(bundle: &ResultsBundle, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tables: [Table; 2] = [
        (ACCURACY_FILE, &ACCURACY_HEADER, accuracy_rows(bundle)),
        (EFFICIENCY_FILE, &EFFICIENCY_HEADER, efficiency_rows(bundle)),
    ];
    let mut written = Vec::new();
    for (name, header, rows) in tables {
        let path = dir.join(name);
        let mut w = writer(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
