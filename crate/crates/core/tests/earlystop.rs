mod common;

use common::*;
use flrce::earlystop::{average_conflicts, es_check, EsConfig};
use flrce::selection::Mode;
use flrce::ParamVector;
use proptest::prelude::*;

fn update_set() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..8, 1usize..6).prop_flat_map(|(p, d)| {
        prop::collection::vec(
            prop::collection::vec(prop_oneof![4 => -1.0..1.0f64, 1 => Just(0.0)], d),
            p,
        )
    })
}

fn as_params(set: &[Vec<f64>]) -> Vec<ParamVector> {
    set.iter().map(|v| pv(v)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn conflicts_match_brute_force(set in update_set()) {
        let p = set.len();
        prop_assert_eq!(average_conflicts(&as_params(&set), p), oracle_conflicts(&set, p));
    }

    #[test]
    fn conflicts_stay_within_bounds(set in update_set()) {
        let p = set.len();
        let c = average_conflicts(&as_params(&set), p);
        prop_assert!(c >= 0.0);
        prop_assert!(c <= (p - 1) as f64);
    }

    #[test]
    fn conflicts_ignore_positive_scaling(set in update_set(), scales in prop::collection::vec(1e-3..1e3f64, 8)) {
        let p = set.len();
        let ups = as_params(&set);
        let scaled: Vec<ParamVector> = ups.iter().zip(&scales).map(|(u, s)| u.scaled(*s)).collect();
        prop_assert_eq!(average_conflicts(&ups, p), average_conflicts(&scaled, p));
    }

    #[test]
    fn raising_the_threshold_never_adds_a_stop(set in update_set(), a in 0.0..8.0f64, b in 0.0..8.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p = set.len();
        let ups = as_params(&set);
        let fires = |psi| es_check(Mode::Exploit, &ups, p, &EsConfig { threshold: psi, enabled: true });
        prop_assert!(!fires(hi) || fires(lo));
    }

    #[test]
    fn threshold_at_participant_count_never_fires(set in update_set()) {
        let p = set.len();
        let cfg = EsConfig { threshold: p as f64, enabled: true };
        prop_assert!(!es_check(Mode::Exploit, &as_params(&set), p, &cfg));
    }
}

#[test]
fn opposed_pair_scenario() {
    let ups = [pv(&[0.3, -0.2, 1.0]), pv(&[-0.6, 0.4, -2.0])];
    let cfg = EsConfig {
        threshold: 1.0,
        enabled: true,
    };
    assert!(es_check(Mode::Exploit, &ups, 2, &cfg));
    assert!(!es_check(Mode::Explore, &ups, 2, &cfg));
}

#[test]
fn all_pairwise_opposed_reaches_the_upper_bound() {
    // three unit vectors 120 degrees apart conflict pairwise
    let s = 3f64.sqrt() / 2.0;
    let ups = [pv(&[1.0, 0.0]), pv(&[-0.5, s]), pv(&[-0.5, -s])];
    assert_eq!(average_conflicts(&ups, 3), 2.0);
}
