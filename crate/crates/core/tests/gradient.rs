mod common;

use common::*;
use flrce::data::Dataset;
use flrce::model::{forward_loss, gradient, local_train, Activation, ModelSpec, TrainConfig};
use flrce::rng::seeded_rng;
use flrce::ParamVector;
use proptest::prelude::*;
use rand::Rng;

/// A random net, parameters near the init scale and a batch in [0,1].
fn random_triple(seed: u64) -> (ModelSpec, ParamVector, Dataset) {
    let mut rng = seeded_rng(seed);
    let input_dim = rng.random_range(1..6);
    let depth = rng.random_range(0..3);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..6)).collect();
    let classes = rng.random_range(2..5);
    let activation = if rng.random_bool(0.5) {
        Activation::Relu
    } else {
        Activation::Tanh
    };
    let spec = ModelSpec::new(input_dim, hidden, classes, activation);
    let params = ParamVector::from_vec(random_vec(&mut rng, spec.param_count(), 1.0));
    let n = rng.random_range(1..9);
    let features: Vec<f64> = (0..n * input_dim).map(|_| rng.random_range(0.0..1.0)).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    (spec, params, Dataset::new(features, labels, input_dim, classes).unwrap())
}

#[test]
fn backprop_matches_finite_differences() {
    let mut checked = 0;
    let mut seed = 0;
    while checked < 100 {
        seed += 1;
        let (spec, params, batch) = random_triple(seed);
        let g = gradient(&params, &spec, &batch).unwrap();
        let fd = fd_gradient(&params, &spec, &batch, 1e-6);
        let fd_coarse = fd_gradient(&params, &spec, &batch, 1e-5);
        // a ReLU kink inside the stencil makes the two step sizes disagree;
        // those cases say nothing about backprop
        if max_relative_error(&fd, &fd_coarse) > 1e-5 {
            continue;
        }
        let err = max_relative_error(g.as_slice(), &fd);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
        checked += 1;
    }
}

#[test]
fn logistic_regression_reaches_stationarity() {
    // overlapping classes keep the optimum finite
    let mut rng = seeded_rng(5);
    let n = 40;
    let features: Vec<f64> = (0..n * 2).map(|_| rng.random_range(0.0..1.0)).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let data = Dataset::new(features, labels, 2, 2).unwrap();
    let spec = ModelSpec::new(2, vec![], 2, Activation::Relu);
    let mut w = spec.init_params(1);
    for _ in 0..20_000 {
        let g = gradient(&w, &spec, &data).unwrap();
        w.axpy(-2.0, &g);
    }
    let g = gradient(&w, &spec, &data).unwrap();
    assert!(g.norm() < 1e-6, "gradient norm {}", g.norm());
}

#[test]
fn small_steps_descend_monotonically() {
    for seed in 0..20 {
        let (spec, params, batch) = random_triple(1000 + seed);
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            local_epochs: 1,
            batch_size: batch.len(),
        };
        let mut w = params;
        let mut loss = forward_loss(&w, &spec, &batch).unwrap();
        for _ in 0..50 {
            let u = local_train(&w, &spec, &batch, &cfg, 0).unwrap();
            w = &w + &u;
            let next = forward_loss(&w, &spec, &batch).unwrap();
            assert!(next <= loss + 1e-15, "seed {seed}: {loss} -> {next}");
            loss = next;
        }
    }
}

#[test]
fn zero_learning_rate_is_a_zero_update() {
    for seed in 0..10 {
        let (spec, params, batch) = random_triple(2000 + seed);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            local_epochs: 3,
            batch_size: 2,
        };
        let u = local_train(&params, &spec, &batch, &cfg, seed).unwrap();
        assert!(u.is_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_is_finite_with_model_dimension(seed in 0u64..1_000_000) {
        let (spec, params, batch) = random_triple(seed);
        let g = gradient(&params, &spec, &batch).unwrap();
        prop_assert_eq!(g.len(), spec.param_count());
        prop_assert!(g.is_finite());
        prop_assert!(forward_loss(&params, &spec, &batch).unwrap().is_finite());
    }

    #[test]
    fn local_update_keeps_dimension(seed in 0u64..1_000_000, epochs in 1usize..4, bs in 1usize..5) {
        let (spec, params, batch) = random_triple(seed);
        let cfg = TrainConfig { learning_rate: 0.1, local_epochs: epochs, batch_size: bs };
        let u = local_train(&params, &spec, &batch, &cfg, seed).unwrap();
        prop_assert_eq!(u.len(), params.len());
        prop_assert!(u.is_finite());
    }
}
