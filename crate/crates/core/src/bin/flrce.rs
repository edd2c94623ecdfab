use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flrce::bundle::run_config;
use flrce::config::ExperimentConfig;
use flrce::export::export_plot_data;
use flrce::orchestrator::StrategyKind;
use flrce::sweep::{render_csv, sweep_psi};
use flrce::Result;

#[derive(Parser)]
#[command(name = "flrce", version, about = "Federated learning simulator with relationship-based selection and early stopping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured strategy and write results.json plus CSV tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to $FLRCE_OUT_DIR, then ./results.
        #[arg(long, env = "FLRCE_OUT_DIR", default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of flrce, flrce_no_es, random_fedavg.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<StrategyKind>>,
        /// Label column for CSV data.
        #[arg(long)]
        label_column: Option<String>,
    },
    /// Run the early-stopping strategy once per threshold and print a table.
    SweepPsi {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write sweep.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        label_column: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run {
            config,
            out,
            seed,
            strategies,
            label_column,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(strategies) = strategies {
                cfg.strategies = strategies;
            }
            let bundle = run_config(&cfg, label_column.as_deref())?;
            bundle.write(&out)?;
            export_plot_data(&bundle, &out)?;
            for s in &bundle.strategies {
                println!(
                    "{:<14} rounds={:<4} early_stop={:<5} accuracy={:.4} energy_j={:.3} bytes={}",
                    s.strategy.as_str(),
                    s.stop_round,
                    s.stopped_early,
                    s.final_accuracy,
                    s.totals.energy_j,
                    s.totals.bytes
                );
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::SweepPsi {
            config,
            values,
            seed,
            out,
            label_column,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let rows = sweep_psi(&cfg, &values, label_column.as_deref())?;
            let table = render_csv(&rows)?;
            print!("{table}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| flrce::Error::io(&dir, e))?;
                let path = dir.join("sweep.csv");
                std::fs::write(&path, &table).map_err(|e| flrce::Error::io(&path, e))?;
            }
            Ok(())
        }
    }
}
