//! Relationship modeling between clients.
//!
//! Two clients that were active in the same (or the previous) round are
//! related by the cosine similarity of their updates. For a client whose
//! stored update is older, the relationship is measured geometrically: the
//! stored update, anchored at the global model it was computed from,
//! defines a ray towards that client's local optimum. If applying the new
//! update moves the current global model closer to that ray, the
//! relationship is positive; if it moves it away, negative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::ServerMaps;
use crate::params::ParamVector;

/// Absolute floor on distances below which the ratio of orthogonal
/// distances is treated as undefined.
pub const EPS_GEO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("zero-norm vector: similarity undefined")]
    ZeroNorm,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("global model lies on the stored update ray")]
    DegenerateDistance,
}

/// An update together with the global model it was computed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredUpdate {
    pub update: ParamVector,
    pub anchor: ParamVector,
    pub round: usize,
}

fn same_dim(a: &ParamVector, b: &ParamVector) -> Result<(), GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::DimensionMismatch(a.len(), b.len()));
    }
    Ok(())
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cossim(a: &ParamVector, b: &ParamVector) -> Result<f64, GeometryError> {
    same_dim(a, b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(GeometryError::ZeroNorm);
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Distance from `point` to the ray `anchor + s * update`, measured
/// perpendicular to the update direction.
pub fn orthdist(point: &ParamVector, line: &AnchoredUpdate) -> Result<f64, GeometryError> {
    same_dim(point, &line.anchor)?;
    same_dim(point, &line.update)?;
    let norm = line.update.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(GeometryError::ZeroNorm);
    }
    let dir = line.update.scaled(1.0 / norm);
    let mut residual = point - &line.anchor;
    let along = residual.dot(&dir);
    residual.axpy(-along, &dir);
    Ok(residual.norm())
}

/// Relationship of the client that produced `update` towards the client
/// whose anchored update is `stored`:
/// `max(1 - d_p / d_o, -1)` with `d_o` the orthogonal distance of
/// `global` to the stored ray and `d_p` that of `global + update`.
pub fn relate_async(global: &ParamVector, update: &ParamVector, stored: &AnchoredUpdate) -> Result<f64, GeometryError> {
    same_dim(global, update)?;
    let d_o = orthdist(global, stored)?;
    if d_o < EPS_GEO {
        return Err(GeometryError::DegenerateDistance);
    }
    let d_p = orthdist(&(global + update), stored)?;
    Ok((1.0 - d_p / d_o).max(-1.0))
}

/// M x M relationship degrees. Row `k` holds client `k`'s view of its
/// peers; the diagonal stays at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipMap {
    size: usize,
    omega: Vec<f64>,
}

impl RelationshipMap {
    pub fn new(size: usize) -> Self {
        RelationshipMap {
            size,
            omega: vec![0.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.omega[k * self.size + j]
    }

    pub fn set(&mut self, k: usize, j: usize, value: f64) {
        debug_assert!(k != j, "diagonal is fixed at zero");
        debug_assert!((-1.0..=1.0).contains(&value));
        self.omega[k * self.size + j] = value;
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.omega[k * self.size..(k + 1) * self.size]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|k| self.row(k).to_vec()).collect()
    }
}

/// Per-client heuristic values, the off-diagonal row sums of Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicMap {
    values: Vec<f64>,
}

impl HeuristicMap {
    pub fn new(size: usize) -> Self {
        HeuristicMap { values: vec![0.0; size] }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        HeuristicMap { values }
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn set(&mut self, k: usize, value: f64) {
        self.values[k] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Sum of a relationship row, skipping the client's own entry.
pub fn heuristic_of(row: &[f64], own: usize) -> f64 {
    row.iter().enumerate().filter(|&(j, _)| j != own).map(|(_, v)| v).sum()
}

/// How each peer of `k` was handled by [`update_relationships_g`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelateStats {
    pub synchronous: Vec<usize>,
    pub asynchronous: Vec<usize>,
    /// Peers with a stored update whose kernel was undefined; their entry
    /// keeps its previous value.
    pub skipped: Vec<usize>,
}

/// Rewrites row `k` of Ω from client `k`'s round-`round` update.
///
/// Peers whose last recorded round is `round - 1` or later are related by
/// cosine similarity; older peers by [`relate_async`] against their
/// anchored update. Peers never seen are left alone. `global` is the model
/// broadcast in `round`. The caller must already have recorded every
/// round-`round` update in `maps`.
pub fn update_relationships_g(
    k: usize,
    update: &ParamVector,
    maps: &mut ServerMaps,
    global: &ParamVector,
    round: usize,
) -> RelateStats {
    let mut stats = RelateStats::default();
    for j in 0..maps.num_clients() {
        if j == k {
            continue;
        }
        let Some(stored) = maps.stored_update(j) else {
            continue;
        };
        let synchronous = stored.round + 1 >= round;
        let value = if synchronous {
            cossim(&stored.update, update)
        } else {
            relate_async(global, update, stored)
        };
        match value {
            Ok(v) => {
                maps.omega.set(k, j, v);
                if synchronous {
                    stats.synchronous.push(j);
                } else {
                    stats.asynchronous.push(j);
                }
            }
            Err(_) => stats.skipped.push(j),
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::from_vec(v.to_vec())
    }

    fn line(anchor: &[f64], u: &[f64]) -> AnchoredUpdate {
        AnchoredUpdate {
            update: pv(u),
            anchor: pv(anchor),
            round: 1,
        }
    }

    #[test]
    fn cossim_basics() {
        let u = pv(&[0.3, -1.2, 4.0]);
        assert!((cossim(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cossim(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0])).unwrap(), 0.0);
        // 4 / (sqrt5 * sqrt5)
        assert!((cossim(&pv(&[1.0, 2.0]), &pv(&[2.0, 1.0])).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(cossim(&pv(&[0.0, 0.0]), &pv(&[1.0, 0.0])), Err(GeometryError::ZeroNorm));
        assert!(matches!(
            cossim(&pv(&[1.0]), &pv(&[1.0, 0.0])),
            Err(GeometryError::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn orthdist_examples() {
        assert!(orthdist(&pv(&[2.0, 2.0]), &line(&[0.0, 0.0], &[1.0, 1.0])).unwrap() < 1e-12);
        assert!((orthdist(&pv(&[3.0, 4.0]), &line(&[0.0, 0.0], &[1.0, 0.0])).unwrap() - 4.0).abs() < 1e-12);
        assert!((orthdist(&pv(&[4.0, 5.0]), &line(&[1.0, 1.0], &[0.0, 2.0])).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(
            orthdist(&pv(&[1.0, 1.0]), &line(&[0.0, 0.0], &[0.0, 0.0])),
            Err(GeometryError::ZeroNorm)
        );
    }

    #[test]
    fn relate_async_examples() {
        let stored = line(&[0.0, 0.0], &[0.0, 1.0]);
        let w = pv(&[2.0, 0.0]);
        assert!((relate_async(&w, &pv(&[-1.0, 0.0]), &stored).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(relate_async(&w, &pv(&[0.0, 0.0]), &stored).unwrap(), 0.0);
        assert_eq!(relate_async(&w, &pv(&[6.0, 0.0]), &stored).unwrap(), -1.0);
        // global model already on the stored ray
        assert_eq!(
            relate_async(&pv(&[0.0, 3.0]), &pv(&[1.0, 0.0]), &stored),
            Err(GeometryError::DegenerateDistance)
        );
    }

    #[test]
    fn heuristic_sums_off_diagonal() {
        assert!((heuristic_of(&[0.0, 0.5, -0.2, 0.7], 0) - 1.0).abs() < 1e-15);
        assert_eq!(heuristic_of(&[0.0; 5], 2), 0.0);
        assert_eq!(heuristic_of(&[0.9, 0.1, 0.2], 0), heuristic_of(&[0.0, 0.1, 0.2], 0));
    }

    #[test]
    fn g_branches() {
        let mut maps = ServerMaps::new(4);
        let w = pv(&[1.0, 1.0]);
        let u = pv(&[1.0, 0.5]);
        // client 1 active this round with the same update
        maps.record(1, u.clone(), w.clone(), 5);
        // client 2 active last round
        maps.record(2, pv(&[-1.0, 0.0]), pv(&[0.0, 0.0]), 4);
        // client 3 active three rounds ago
        maps.record(3, pv(&[0.0, 1.0]), pv(&[-1.0, -1.0]), 2);
        maps.record(0, u.clone(), w.clone(), 5);

        let stats = update_relationships_g(0, &u, &mut maps, &w, 5);
        assert_eq!(stats.synchronous, vec![1, 2]);
        assert_eq!(stats.asynchronous, vec![3]);
        assert!((maps.omega.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((maps.omega.get(0, 2) - cossim(&pv(&[-1.0, 0.0]), &u).unwrap()).abs() < 1e-15);
        let stored = maps.stored_update(3).unwrap().clone();
        let expected = relate_async(&w, &u, &stored).unwrap();
        assert_eq!(maps.omega.get(0, 3), expected);
        assert_eq!(maps.omega.get(0, 0), 0.0);
    }

    #[test]
    fn g_leaves_unseen_and_degenerate_pairs() {
        let mut maps = ServerMaps::new(3);
        maps.omega.set(0, 2, 0.25);
        maps.omega.set(0, 1, -0.5);
        // client 1 stored a zero update this round: cosine undefined
        maps.record(1, pv(&[0.0, 0.0]), pv(&[0.0, 0.0]), 3);
        let u = pv(&[1.0, 0.0]);
        maps.record(0, u.clone(), pv(&[0.0, 0.0]), 3);
        let stats = update_relationships_g(0, &u, &mut maps, &pv(&[0.0, 0.0]), 3);
        assert_eq!(stats.skipped, vec![1]);
        assert_eq!(maps.omega.get(0, 1), -0.5);
        // client 2 never seen
        assert_eq!(maps.omega.get(0, 2), 0.25);
    }
}
