//! Conflict-counting early stopping.
//!
//! On an exploit round the server counts ordered pairs of selected clients
//! whose updates have negative cosine similarity and averages over the
//! number of participants. Training stops once that average reaches the
//! threshold ψ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::relationship::cossim;
use crate::selection::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsConfig {
    pub threshold: f64,
    pub enabled: bool,
}

impl EsConfig {
    /// Threshold at half the number of participants.
    pub fn half_of(per_round: usize) -> Self {
        EsConfig {
            threshold: per_round as f64 / 2.0,
            enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::field("early_stop.psi", "must be a non-negative finite number"));
        }
        Ok(())
    }
}

/// Ordered conflicting pairs divided by `participants`. Zero-norm updates
/// take no part in any pair.
pub fn average_conflicts(updates: &[ParamVector], participants: usize) -> f64 {
    let mut conflicts = 0usize;
    for (k, uk) in updates.iter().enumerate() {
        for (j, uj) in updates.iter().enumerate() {
            if k == j {
                continue;
            }
            if matches!(cossim(uk, uj), Ok(c) if c < 0.0) {
                conflicts += 1;
            }
        }
    }
    if participants == 0 {
        return 0.0;
    }
    conflicts as f64 / participants as f64
}

/// Explore rounds never stop training. `participants` is P.
pub fn es_check(mode: Mode, updates: &[ParamVector], participants: usize, cfg: &EsConfig) -> bool {
    if !cfg.enabled || mode != Mode::Exploit {
        return false;
    }
    average_conflicts(updates, participants) >= cfg.threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::from_vec(v.to_vec())
    }

    #[test]
    fn opposed_pair_stops_at_threshold_one() {
        let ups = [pv(&[1.0, 0.0]), pv(&[-1.0, 0.0])];
        let cfg = EsConfig {
            threshold: 1.0,
            enabled: true,
        };
        assert_eq!(average_conflicts(&ups, 2), 1.0);
        assert!(es_check(Mode::Exploit, &ups, 2, &cfg));
        assert!(!es_check(Mode::Explore, &ups, 2, &cfg));
    }

    #[test]
    fn aligned_updates_never_stop() {
        let ups = [pv(&[1.0, 0.1]), pv(&[0.5, 0.4]), pv(&[2.0, -0.1])];
        let cfg = EsConfig {
            threshold: 0.01,
            enabled: true,
        };
        assert_eq!(average_conflicts(&ups, 3), 0.0);
        assert!(!es_check(Mode::Exploit, &ups, 3, &cfg));
    }

    #[test]
    fn orthogonal_is_not_conflict() {
        assert_eq!(average_conflicts(&[pv(&[1.0, 0.0]), pv(&[0.0, 1.0])], 2), 0.0);
    }

    #[test]
    fn zero_updates_are_excluded() {
        let ups = [pv(&[1.0, 0.0]), pv(&[0.0, 0.0]), pv(&[-1.0, 0.0])];
        assert!((average_conflicts(&ups, 3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn disabled_never_fires() {
        let ups = [pv(&[1.0]), pv(&[-1.0])];
        let cfg = EsConfig {
            threshold: 0.0,
            enabled: false,
        };
        assert!(!es_check(Mode::Exploit, &ups, 2, &cfg));
    }

    #[test]
    fn default_threshold_is_half_of_participants() {
        assert_eq!(EsConfig::half_of(4).threshold, 2.0);
        assert_eq!(EsConfig::half_of(10).threshold, 5.0);
    }
}
