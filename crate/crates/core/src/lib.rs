//! Deterministic federated-learning simulator.
//!
//! The server keeps a relationship map between clients built from the
//! geometry of their parameter updates, selects the clients with the
//! largest summed relationship (with a decaying chance of random
//! exploration), and stops training once the selected clients start
//! pulling the global model in opposing directions.
//!
//! Module map:
//! - [`params`]: flat parameter vectors shared by weights and updates.
//! - [`model`]: MLP loss, backprop and the local SGD trainer.
//! - [`data`]: synthetic data, Dirichlet non-iid partitioning, CSV ingestion.
//! - [`relationship`]: cosine / orthogonal-distance kernels and relationship upkeep.
//! - [`selection`]: explore-exploit client selection.
//! - [`earlystop`]: the conflict-counting stopping criterion.
//! - [`orchestrator`]: the server loop and its baselines.
//! - [`accounting`]: simulated energy and bandwidth costs and efficiency metrics.
//! - [`config`], [`bundle`], [`sweep`], [`export`]: experiment configuration and results.

pub mod accounting;
pub mod bundle;
pub mod config;
pub mod data;
pub mod earlystop;
pub mod error;
pub mod export;
pub mod model;
pub mod orchestrator;
pub mod params;
pub mod relationship;
pub mod rng;
pub mod selection;
pub mod sweep;

pub use error::{Error, Result};
pub use params::ParamVector;
