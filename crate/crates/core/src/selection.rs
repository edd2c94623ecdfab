//! Explore-exploit client selection.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relationship::HeuristicMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Explore,
    Exploit,
}

/// Probability of a random (explore) round, decaying geometrically from
/// `initial_prob` at round 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExploreSchedule {
    pub initial_prob: f64,
    pub decay: f64,
}

impl Default for ExploreSchedule {
    fn default() -> Self {
        ExploreSchedule {
            initial_prob: 1.0,
            decay: 0.98,
        }
    }
}

impl ExploreSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.initial_prob) {
            return Err(Error::field("selection.initial_prob", "must lie in [0, 1]"));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::field("selection.decay", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// `initial_prob * decay^(t-1)`; rounds start at 1.
pub fn explore_prob(round: usize, sched: &ExploreSchedule) -> f64 {
    debug_assert!(round >= 1);
    let exponent = round.saturating_sub(1).min(i32::MAX as usize) as i32;
    sched.initial_prob * sched.decay.powi(exponent)
}

/// `count` distinct clients drawn uniformly from `pool`, returned in
/// ascending id order.
pub fn select_random<R: Rng + ?Sized>(pool: &[usize], count: usize, rng: &mut R) -> Result<Vec<usize>> {
    check_pool(pool, count)?;
    let mut chosen: Vec<usize> = index::sample(rng, pool.len(), count).into_iter().map(|i| pool[i]).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// The `count` clients with the largest heuristic values, ties to the
/// smaller id, returned in ascending id order.
pub fn select_top(heuristics: &HeuristicMap, pool: &[usize], count: usize) -> Result<Vec<usize>> {
    check_pool(pool, count)?;
    let mut ranked = pool.to_vec();
    ranked.sort_by(|&a, &b| heuristics.get(b).total_cmp(&heuristics.get(a)).then(a.cmp(&b)));
    ranked.truncate(count);
    ranked.sort_unstable();
    Ok(ranked)
}

/// One coin per round decides the mode: with probability
/// [`explore_prob`] the round explores, otherwise it exploits.
pub fn select_clients_h<R: Rng + ?Sized>(
    heuristics: &HeuristicMap,
    round: usize,
    count: usize,
    pool: &[usize],
    sched: &ExploreSchedule,
    rng: &mut R,
) -> Result<(Vec<usize>, Mode)> {
    check_pool(pool, count)?;
    let coin: f64 = rng.random();
    if coin < explore_prob(round, sched) {
        Ok((select_random(pool, count, rng)?, Mode::Explore))
    } else {
        Ok((select_top(heuristics, pool, count)?, Mode::Exploit))
    }
}

fn check_pool(pool: &[usize], count: usize) -> Result<()> {
    if pool.len() < count {
        return Err(Error::config(format!(
            "cannot select {count} clients from a pool of {}",
            pool.len()
        )));
    }
    Ok(())
}
