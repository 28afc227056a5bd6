use ccc_core::env::MatrixGame;
use ccc_core::eval::{analytic_rate, Summary};
use ccc_core::policy::PolicyParams;
use ccc_core::pomg::Environment;
use ccc_core::training::{
    collect_batch, policy_gradient, shape_rewards, train_pair, Baseline, Network, Scheme, TrainConfig,
};
use proptest::prelude::*;

fn matrix_config(scheme: Scheme, seed: u64) -> TrainConfig {
    TrainConfig {
        scheme,
        network: Network::Tabular,
        batches: 300,
        batch_size: 16,
        episode_length: 50,
        learning_rate: 3e-2,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn baseline_does_not_bias_the_gradient() {
    let game = MatrixGame::prisoners_dilemma();
    let policy = PolicyParams::tabular(&[
        vec![0.4, -0.1],
        vec![0.0, 0.3],
        vec![-0.2, 0.2],
        vec![0.1, 0.0],
        vec![0.2, -0.3],
    ])
    .unwrap();
    let params = [policy.clone(), policy.clone()];
    let cfg = TrainConfig {
        network: Network::Tabular,
        batch_size: 4,
        episode_length: 6,
        discount: 0.9,
        entropy_weight: 0.0,
        learning_rate: 0.0,
        seed: 5,
        ..TrainConfig::default()
    };
    let n = policy.params().len();
    let (mut plain, mut based) = (vec![Vec::new(); n], vec![Vec::new(); n]);
    for b in 0..10_000 {
        let batch = collect_batch(&game, &params, &cfg, b).unwrap();
        let (g0, _) = policy_gradient(&policy, &batch.players[0], cfg.discount, Baseline::None, 0.0).unwrap();
        let (g1, _) = policy_gradient(&policy, &batch.players[0], cfg.discount, Baseline::LeaveOneOut, 0.0).unwrap();
        for i in 0..n {
            plain[i].push(g0[i]);
            based[i].push(g1[i]);
        }
    }
    let mut variance_drop = 0;
    for i in 0..n {
        let (a, b) = (Summary::of(&plain[i]), Summary::of(&based[i]));
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() <= 3.0 * se, "param {i}: {} vs {} (se {se})", a.mean, b.mean);
        if b.std_dev < a.std_dev {
            variance_drop += 1;
        }
    }
    assert!(variance_drop >= n / 2, "baseline reduced variance on only {variance_drop} of {n} parameters");
}

#[test]
fn prosocial_players_see_identical_rewards() {
    let game = MatrixGame::prisoners_dilemma();
    let cfg = TrainConfig { scheme: Scheme::Prosocial, ..matrix_config(Scheme::Prosocial, 1) };
    let params = ccc_core::training::initial_params(&game.spec(), &cfg).unwrap();
    let batch = collect_batch(&game, &params, &cfg, 0).unwrap();
    assert_eq!(batch.players[0].returns(1.0), batch.players[1].returns(1.0));
    let selfish = TrainConfig { scheme: Scheme::Selfish, ..cfg };
    let batch = collect_batch(&game, &params, &selfish, 0).unwrap();
    assert_ne!(batch.players[0].returns(1.0), batch.players[1].returns(1.0));
}

#[test]
fn training_is_deterministic() {
    let game = MatrixGame::prisoners_dilemma();
    let cfg = TrainConfig { batches: 20, ..matrix_config(Scheme::Selfish, 11) };
    assert_eq!(train_pair(&game, &cfg).unwrap(), train_pair(&game, &cfg).unwrap());
    let other = TrainConfig { seed: 12, ..cfg.clone() };
    assert_ne!(train_pair(&game, &cfg).unwrap().params, train_pair(&game, &other).unwrap().params);
}

#[test]
fn matrix_training_finds_the_expected_outcomes() {
    let game = MatrixGame::prisoners_dilemma();
    for (scheme, target) in [(Scheme::Selfish, 2.0), (Scheme::Prosocial, 4.0)] {
        for seed in 0..2 {
            let pair = train_pair(&game, &matrix_config(scheme, seed)).unwrap();
            let rate = analytic_rate(&game, &pair.params[0], &pair.params[1]).unwrap();
            let joint = rate.rates[0] + rate.rates[1];
            assert!((joint - target).abs() <= 0.2, "{scheme} seed {seed}: joint rate {joint}");
        }
    }
}

proptest! {
    #[test]
    fn prosocial_shaping_is_symmetric(r1 in -10.0f64..10.0, r2 in -10.0f64..10.0) {
        let (a, b) = shape_rewards(Scheme::Prosocial, r1, r2);
        prop_assert_eq!(a, b);
        prop_assert_eq!(a, r1 + r2);
        prop_assert_eq!(shape_rewards(Scheme::Selfish, r1, r2), (r1, r2));
    }
}
