//! The server loop.
//!
//! Each round: select clients, broadcast the global model, train locally,
//! record every update in the update/time maps, aggregate, relate each
//! selected client to its peers, refresh heuristics and finally test the
//! stopping criterion. Local training fans out across threads; everything
//! after it runs in client-id order so that runs replay exactly.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::{round_bandwidth, round_energy, CostModel, ResourceTotals};
use crate::data::Dataset;
use crate::earlystop::{average_conflicts, es_check, EsConfig};
use crate::error::{Error, Result};
use crate::model::{accuracy, local_train, ModelSpec, TrainConfig};
use crate::params::ParamVector;
use crate::relationship::{heuristic_of, update_relationships_g, AnchoredUpdate, HeuristicMap, RelateStats, RelationshipMap};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::selection::{select_clients_h, select_random, ExploreSchedule, Mode};

/// Server-side state: heuristics H, last active round R, latest anchored
/// update V and the relationship map Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerMaps {
    pub heuristics: HeuristicMap,
    last_round: Vec<Option<usize>>,
    updates: Vec<Option<AnchoredUpdate>>,
    pub omega: RelationshipMap,
}

impl ServerMaps {
    pub fn new(num_clients: usize) -> Self {
        ServerMaps {
            heuristics: HeuristicMap::new(num_clients),
            last_round: vec![None; num_clients],
            updates: vec![None; num_clients],
            omega: RelationshipMap::new(num_clients),
        }
    }

    pub fn num_clients(&self) -> usize {
        self.last_round.len()
    }

    /// Writes V[k] and R[k] together.
    pub fn record(&mut self, k: usize, update: ParamVector, anchor: ParamVector, round: usize) {
        self.updates[k] = Some(AnchoredUpdate { update, anchor, round });
        self.last_round[k] = Some(round);
    }

    pub fn stored_update(&self, k: usize) -> Option<&AnchoredUpdate> {
        self.updates[k].as_ref()
    }

    pub fn last_round(&self, k: usize) -> Option<usize> {
        self.last_round[k]
    }

    pub fn refresh_heuristic(&mut self, k: usize) {
        let h = heuristic_of(self.omega.row(k), k);
        self.heuristics.set(k, h);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Flrce,
    FlrceNoEs,
    RandomFedavg,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::Flrce, StrategyKind::FlrceNoEs, StrategyKind::RandomFedavg];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Flrce => "flrce",
            StrategyKind::FlrceNoEs => "flrce_no_es",
            StrategyKind::RandomFedavg => "random_fedavg",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "flrce" => Ok(StrategyKind::Flrce),
            "flrce_no_es" => Ok(StrategyKind::FlrceNoEs),
            "random_fedavg" => Ok(StrategyKind::RandomFedavg),
            other => Err(Error::field(
                "strategies",
                format!("unknown strategy `{other}` (expected flrce, flrce_no_es or random_fedavg)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub mode: Mode,
    pub selected: Vec<usize>,
    pub mean_accuracy: f64,
    pub conflicts: Option<f64>,
    pub es_triggered: bool,
    pub energy_j: f64,
    pub bytes: u64,
}

/// Everything a run needs, with data already partitioned.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub rounds: usize,
    pub per_round: usize,
    pub schedule: ExploreSchedule,
    pub early_stop: EsConfig,
    pub cost: CostModel,
    pub seed: u64,
    pub clients: Vec<Dataset>,
}

impl ExperimentSetup {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.schedule.validate()?;
        self.early_stop.validate()?;
        self.cost.validate()?;
        if self.rounds < 1 {
            return Err(Error::field("rounds", "must be at least 1"));
        }
        if self.per_round < 1 {
            return Err(Error::field("per_round", "must be at least 1"));
        }
        if self.per_round > self.clients.len() {
            return Err(Error::field(
                "per_round",
                format!("{} exceeds the number of clients ({})", self.per_round, self.clients.len()),
            ));
        }
        for (k, c) in self.clients.iter().enumerate() {
            if c.input_dim() != self.model.input_dim {
                return Err(Error::config(format!(
                    "client {k}: feature width {} does not match model input {}",
                    c.input_dim(),
                    self.model.input_dim
                )));
            }
            if c.classes() > self.model.output_classes {
                return Err(Error::config(format!(
                    "client {k}: {} classes exceed model outputs {}",
                    c.classes(),
                    self.model.output_classes
                )));
            }
        }
        Ok(())
    }

    pub fn initial_model(&self) -> ParamVector {
        self.model.init_params(derive_seed(self.seed, Stream::Init, &[]))
    }

    fn shuffle_seed(&self, client: usize, round: usize) -> u64 {
        derive_seed(self.seed, Stream::LocalTrain, &[client as u64, round as u64])
    }
}

/// p_k = n_k / Σ n over the round's participants.
pub fn aggregation_weights(sample_counts: &[usize]) -> Result<Vec<f64>> {
    if sample_counts.is_empty() {
        return Err(Error::config("no updates to aggregate"));
    }
    let total: usize = sample_counts.iter().sum();
    if total == 0 {
        return Err(Error::config("all participants report zero samples"));
    }
    Ok(sample_counts.iter().map(|&n| n as f64 / total as f64).collect())
}

/// `global + Σ p_k u_k` with sample-count weights.
pub fn aggregate(global: &ParamVector, updates: &[(&ParamVector, usize)]) -> Result<ParamVector> {
    let counts: Vec<usize> = updates.iter().map(|(_, n)| *n).collect();
    let weights = aggregation_weights(&counts)?;
    let mut next = global.clone();
    for ((u, _), p) in updates.iter().zip(weights) {
        if u.len() != global.len() {
            return Err(Error::DimensionMismatch {
                expected: global.len(),
                got: u.len(),
            });
        }
        next.axpy(p, u);
    }
    Ok(next)
}

/// Unweighted mean of per-client accuracies.
pub fn evaluate_global(w: &ParamVector, spec: &ModelSpec, clients: &[Dataset]) -> Result<f64> {
    if clients.is_empty() {
        return Err(Error::config("no clients to evaluate"));
    }
    let per_client: Vec<f64> = clients
        .par_iter()
        .map(|c| accuracy(w, spec, c))
        .collect::<Result<_>>()?;
    Ok(per_client.iter().sum::<f64>() / clients.len() as f64)
}

/// Detail of the most recent round, kept for inspection.
#[derive(Debug, Clone)]
pub struct RoundTrace {
    pub round: usize,
    pub broadcast: ParamVector,
    /// (client, update) in client-id order
    pub updates: Vec<(usize, ParamVector)>,
    pub weights: Vec<f64>,
    pub relate: Vec<(usize, RelateStats)>,
}

/// Round-by-round driver for one strategy.
pub struct Server<'a> {
    setup: &'a ExperimentSetup,
    strategy: StrategyKind,
    global: ParamVector,
    maps: ServerMaps,
    rng: ChaCha8Rng,
    next_round: usize,
    stopped: bool,
    totals: ResourceTotals,
    records: Vec<RoundRecord>,
    last: Option<RoundTrace>,
}

impl<'a> Server<'a> {
    pub fn new(setup: &'a ExperimentSetup, strategy: StrategyKind) -> Result<Self> {
        setup.validate()?;
        let stream = match strategy {
            StrategyKind::RandomFedavg => Stream::Baseline,
            _ => Stream::Selection,
        };
        Ok(Server {
            setup,
            strategy,
            global: setup.initial_model(),
            maps: ServerMaps::new(setup.clients.len()),
            rng: stream_rng(setup.seed, stream, &[]),
            next_round: 1,
            stopped: false,
            totals: ResourceTotals::default(),
            records: Vec::new(),
            last: None,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.stopped || self.next_round > self.setup.rounds
    }

    pub fn global(&self) -> &ParamVector {
        &self.global
    }

    pub fn maps(&self) -> &ServerMaps {
        &self.maps
    }

    pub fn totals(&self) -> &ResourceTotals {
        &self.totals
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn last_trace(&self) -> Option<&RoundTrace> {
        self.last.as_ref()
    }

    /// Runs one round. Returns `None` once the run is over.
    pub fn step(&mut self) -> Result<Option<&RoundRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        let setup = self.setup;
        let t = self.next_round;
        let pool: Vec<usize> = (0..setup.clients.len()).collect();

        let (selected, mode) = match self.strategy {
            StrategyKind::RandomFedavg => (select_random(&pool, setup.per_round, &mut self.rng)?, Mode::Explore),
            StrategyKind::Flrce | StrategyKind::FlrceNoEs => select_clients_h(
                &self.maps.heuristics,
                t,
                setup.per_round,
                &pool,
                &setup.schedule,
                &mut self.rng,
            )?,
        };

        let broadcast = self.global.clone();
        let trained: Vec<(usize, Result<ParamVector>)> = selected
            .par_iter()
            .map(|&k| {
                let u = local_train(&broadcast, &setup.model, &setup.clients[k], &setup.train, setup.shuffle_seed(k, t));
                (k, u)
            })
            .collect();
        let mut updates = Vec::with_capacity(trained.len());
        for (k, u) in trained {
            match u {
                Ok(u) => updates.push((k, u)),
                Err(Error::EmptyDataset) => continue,
                Err(e) => return Err(e),
            }
        }

        let relational = self.strategy != StrategyKind::RandomFedavg;
        if relational {
            for (k, u) in &updates {
                self.maps.record(*k, u.clone(), broadcast.clone(), t);
            }
        }

        let counts: Vec<usize> = updates.iter().map(|(k, _)| setup.clients[*k].len()).collect();
        let weights = aggregation_weights(&counts)?;
        let pairs: Vec<(&ParamVector, usize)> = updates.iter().map(|(_, u)| u).zip(counts.iter().copied()).collect();
        let next = aggregate(&broadcast, &pairs)?;
        if !next.is_finite() {
            return Err(Error::config(format!(
                "global model diverged at round {t}; lower train.learning_rate"
            )));
        }

        let mut relate = Vec::new();
        if relational {
            for (k, u) in &updates {
                let stats = update_relationships_g(*k, u, &mut self.maps, &broadcast, t);
                self.maps.refresh_heuristic(*k);
                relate.push((*k, stats));
            }
        }

        let update_vecs: Vec<ParamVector> = updates.iter().map(|(_, u)| u.clone()).collect();
        let conflicts = (relational && mode == Mode::Exploit).then(|| average_conflicts(&update_vecs, setup.per_round));
        let es_cfg = EsConfig {
            enabled: setup.early_stop.enabled && self.strategy == StrategyKind::Flrce,
            ..setup.early_stop
        };
        let es_triggered = es_check(mode, &update_vecs, setup.per_round, &es_cfg);

        self.global = next;
        let mean_accuracy = evaluate_global(&self.global, &setup.model, &setup.clients)?;
        let energy_j = round_energy(&counts, setup.train.local_epochs, &setup.cost);
        let bytes = round_bandwidth(selected.len(), setup.model.param_count(), &setup.cost);
        self.totals.add_round(energy_j, bytes);

        self.records.push(RoundRecord {
            round: t,
            mode,
            selected,
            mean_accuracy,
            conflicts,
            es_triggered,
            energy_j,
            bytes,
        });
        self.last = Some(RoundTrace {
            round: t,
            broadcast,
            updates,
            weights,
            relate,
        });
        self.next_round += 1;
        self.stopped = es_triggered;
        Ok(self.records.last())
    }

    pub fn finish(self) -> RunOutcome {
        let stop_round = self.records.len();
        let final_accuracy = self.records.last().map(|r| r.mean_accuracy).unwrap_or(0.0);
        RunOutcome {
            strategy: self.strategy,
            stop_round,
            stopped_early: self.stopped,
            final_accuracy,
            records: self.records,
            final_model: self.global,
            maps: self.maps,
            totals: self.totals,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub strategy: StrategyKind,
    pub records: Vec<RoundRecord>,
    /// Global model after the last aggregation.
    pub final_model: ParamVector,
    pub maps: ServerMaps,
    pub totals: ResourceTotals,
    pub stop_round: usize,
    pub stopped_early: bool,
    pub final_accuracy: f64,
}

pub fn run_experiment(setup: &ExperimentSetup, strategy: StrategyKind) -> Result<RunOutcome> {
    let mut server = Server::new(setup, strategy)?;
    while server.step()?.is_some() {}
    Ok(server.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Activation;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::from_vec(v.to_vec())
    }

    #[test]
    fn aggregate_examples() {
        let w = pv(&[0.0, 0.0]);
        let a = pv(&[1.0, 0.0]);
        let b = pv(&[0.0, 1.0]);
        assert_eq!(aggregate(&w, &[(&a, 50), (&b, 50)]).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(aggregate(&w, &[(&a, 75), (&b, 25)]).unwrap().as_slice(), &[0.75, 0.25]);
        let w2 = pv(&[0.3, -1.7]);
        let u = pv(&[0.25, 4.0]);
        assert_eq!(aggregate(&w2, &[(&u, 9)]).unwrap(), &w2 + &u);
    }

    #[test]
    fn aggregate_rejects_zero_counts() {
        let w = pv(&[0.0]);
        let a = pv(&[1.0]);
        assert!(matches!(aggregate(&w, &[(&a, 0), (&a, 0)]), Err(Error::Config(_))));
        assert!(aggregate(&w, &[]).is_err());
    }

    #[test]
    fn strategy_names_roundtrip() {
        for s in StrategyKind::ALL {
            assert_eq!(s.as_str().parse::<StrategyKind>().unwrap(), s);
        }
        assert!("fedprox".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn constant_model_on_balanced_shards_scores_half() {
        let spec = ModelSpec::new(1, vec![], 2, Activation::Relu);
        // all-zero parameters predict class 0 everywhere
        let w = ParamVector::zeros(spec.param_count());
        let a = Dataset::new(vec![0.1, 0.9], vec![0, 1], 1, 2).unwrap();
        let b = Dataset::new(vec![0.4, 0.6, 0.2, 0.8], vec![1, 0, 0, 1], 1, 2).unwrap();
        assert_eq!(evaluate_global(&w, &spec, &[a, b]).unwrap(), 0.5);
    }

    #[test]
    fn perfect_classifier_scores_one() {
        // 1-d input, logits (-x, x): predicts 1 iff x > 0
        let spec = ModelSpec::new(1, vec![], 2, Activation::Relu);
        let w = pv(&[-1.0, 1.0, 0.0, 0.0]);
        let a = Dataset::new(vec![-0.5, 0.5], vec![0, 1], 1, 2).unwrap();
        let b = Dataset::new(vec![2.0, -3.0, 1.0], vec![1, 0, 1], 1, 2).unwrap();
        assert_eq!(evaluate_global(&w, &spec, &[a, b]).unwrap(), 1.0);
    }

    #[test]
    fn maps_record_keeps_r_and_v_together() {
        let mut maps = ServerMaps::new(3);
        assert!(maps.stored_update(1).is_none());
        assert!(maps.last_round(1).is_none());
        maps.record(1, pv(&[1.0]), pv(&[0.0]), 4);
        assert_eq!(maps.last_round(1), Some(4));
        assert_eq!(maps.stored_update(1).unwrap().round, 4);
    }
}
