//! Experiment configuration files.
//!
//! A config is a TOML document with a handful of flat sections. See the
//! README for the full schema; [`ExperimentConfig::desk_default`] is the
//! profile used by the test suite.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accounting::CostModel;
use crate::data::{generate_synthetic, load_csv, partition_dirichlet, Dataset, PartitionSpec};
use crate::earlystop::EsConfig;
use crate::error::{Error, Result};
use crate::model::{Activation, ModelSpec, TrainConfig};
use crate::orchestrator::{ExperimentSetup, StrategyKind};
use crate::selection::ExploreSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// T
    pub rounds: usize,
    /// M
    pub clients: usize,
    /// P
    pub per_round: usize,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<StrategyKind>,
    pub train: TrainConfig,
    #[serde(default)]
    pub model: ModelSection,
    pub data: DataSection,
    pub partition: PartitionSection,
    #[serde(default)]
    pub selection: ExploreSchedule,
    #[serde(default)]
    pub early_stop: EarlyStopSection,
    #[serde(default)]
    pub cost: CostModel,
}

fn all_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}

/// Hidden layer widths; empty means a single softmax layer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSection {
    Synthetic {
        classes: usize,
        per_class: usize,
        input_dim: usize,
        spread: f64,
    },
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label_column: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStopSection {
    /// Defaults to `per_round / 2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
}

impl ExperimentConfig {
    /// M=20, P=4, T=100, ψ=2, four Gaussian classes split with α=0.1.
    ///
    /// The step size, batch size and class spread were picked so that a
    /// softmax model settles within a few dozen rounds without large
    /// round-to-round swings on the heavily skewed shards.
    pub fn desk_default() -> Self {
        ExperimentConfig {
            seed: 1,
            rounds: 100,
            clients: 20,
            per_round: 4,
            strategies: all_strategies(),
            train: TrainConfig {
                learning_rate: 0.03,
                local_epochs: 5,
                batch_size: 64,
            },
            model: ModelSection::default(),
            data: DataSection::Synthetic {
                classes: 4,
                per_class: 100,
                input_dim: 8,
                spread: 0.4,
            },
            partition: PartitionSection { alpha: 0.1 },
            selection: ExploreSchedule::default(),
            early_stop: EarlyStopSection { psi: Some(2.0) },
            cost: CostModel::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative CSV paths resolve against the config file
        if let DataSection::Csv { path: csv, .. } = &mut cfg.data {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn psi(&self) -> f64 {
        self.early_stop.psi.unwrap_or(self.per_round as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::field("rounds", "must be at least 1"));
        }
        if self.clients < 2 {
            return Err(Error::field("clients", "must be at least 2"));
        }
        if self.per_round < 1 {
            return Err(Error::field("per_round", "must be at least 1"));
        }
        if self.per_round > self.clients {
            return Err(Error::field(
                "per_round",
                format!("{} exceeds clients ({})", self.per_round, self.clients),
            ));
        }
        if self.strategies.is_empty() {
            return Err(Error::field("strategies", "at least one strategy is required"));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return Err(Error::field("strategies", format!("`{s}` listed twice")));
            }
        }
        if !(self.partition.alpha > 0.0 && self.partition.alpha.is_finite()) {
            return Err(Error::field("partition.alpha", "must be positive"));
        }
        self.train.validate()?;
        self.selection.validate()?;
        self.cost.validate()?;
        EsConfig {
            threshold: self.psi(),
            enabled: true,
        }
        .validate()?;
        if self.model.hidden.contains(&0) {
            return Err(Error::field("model.hidden", "hidden layer widths must be at least 1"));
        }
        if let DataSection::Synthetic {
            classes,
            per_class,
            input_dim,
            spread,
        } = self.data
        {
            if classes < 2 {
                return Err(Error::field("data.classes", "must be at least 2"));
            }
            if per_class < 1 {
                return Err(Error::field("data.per_class", "must be at least 1"));
            }
            if input_dim < 1 {
                return Err(Error::field("data.input_dim", "must be at least 1"));
            }
            if !(spread >= 0.0 && spread.is_finite()) {
                return Err(Error::field("data.spread", "must be non-negative"));
            }
        }
        Ok(())
    }

    /// Loads or generates the data. `label_override` (from the command
    /// line) takes precedence over the config's `label_column`.
    pub fn load_dataset(&self, label_override: Option<&str>) -> Result<Dataset> {
        match &self.data {
            DataSection::Synthetic {
                classes,
                per_class,
                input_dim,
                spread,
            } => generate_synthetic(*classes, *per_class, *input_dim, *spread, self.seed),
            DataSection::Csv { path, label_column } => {
                let label = label_override.or(label_column.as_deref()).ok_or_else(|| {
                    Error::field(
                        "--label-column",
                        "CSV data needs a label column: pass --label-column <name> or set data.label_column",
                    )
                })?;
                load_csv(path, label)
            }
        }
    }

    pub fn build_setup(&self, label_override: Option<&str>) -> Result<ExperimentSetup> {
        self.validate()?;
        let data = self.load_dataset(label_override)?;
        let clients = partition_dirichlet(
            &data,
            &PartitionSpec {
                alpha: self.partition.alpha,
                num_clients: self.clients,
                seed: self.seed,
            },
        )?;
        let setup = ExperimentSetup {
            model: ModelSpec::new(
                data.input_dim(),
                self.model.hidden.clone(),
                data.classes(),
                self.model.activation,
            ),
            train: self.train,
            rounds: self.rounds,
            per_round: self.per_round,
            schedule: self.selection,
            early_stop: EsConfig {
                threshold: self.psi(),
                enabled: true,
            },
            cost: self.cost,
            seed: self.seed,
            clients,
        };
        setup.validate()?;
        Ok(setup)
    }
}
