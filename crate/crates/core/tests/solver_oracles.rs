mod common;

use adql_core::experiment::build_sec6_game;
use adql_core::solver::{
    behaviour_opponents, induced_mdp, perturbation_gap, policy_value_exact, q_star_policy_iteration,
};
use adql_core::{
    delta_bar, is_equilibrium, policy_value, q_star, soften_policy, DeterministicPolicy, JointDeterministicPolicy,
    StationaryPolicy, StochasticGame,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_opponent(rng: &mut StdRng, game: &StochasticGame, player: usize) -> StationaryPolicy {
    let probs = (0..game.num_states()).map(|_| common::random_distribution(rng, game.num_actions(player))).collect();
    StationaryPolicy { player, probs }
}

fn random_deterministic(rng: &mut StdRng, game: &StochasticGame) -> JointDeterministicPolicy {
    JointDeterministicPolicy::from_choices(
        (0..game.players)
            .map(|i| (0..game.num_states()).map(|_| rng.random_range(0..game.num_actions(i))).collect())
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn value_iteration_matches_policy_iteration(seed in any::<u64>(), tol_exp in 6i32..=11) {
        let mut rng = StdRng::seed_from_u64(seed);
        let game = common::small_random_game(&mut rng);
        let tol = 10f64.powi(-tol_exp);
        for player in 0..2 {
            let others = [random_opponent(&mut rng, &game, 1 - player)];
            let vi = q_star(&game, player, &others, tol).unwrap();
            let pi = q_star_policy_iteration(&game, player, &others).unwrap();
            prop_assert!(vi.distance(&pi) <= tol.max(1e-9), "{} > {tol}", vi.distance(&pi));
            let residual = induced_mdp(&game, player, &others).unwrap().bellman_residual(&vi);
            prop_assert!(residual <= 2.0 * tol, "residual {residual}");
        }
    }

    #[test]
    fn policy_value_methods_agree(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let game = common::small_random_game(&mut rng);
        let joint: Vec<_> = (0..2).map(|i| random_opponent(&mut rng, &game, i)).collect();
        for player in 0..2 {
            let a = policy_value(&game, player, &joint, 1e-10).unwrap();
            let b = policy_value_exact(&game, player, &joint).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn equilibrium_test_is_monotone_in_eps(seed in any::<u64>(), eps in 0.0f64..5.0, extra in 0.0f64..5.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let game = common::small_random_game(&mut rng);
        let joint = random_deterministic(&mut rng, &game);
        if is_equilibrium(&game, &joint, eps, 1e-9).unwrap() {
            prop_assert!(is_equilibrium(&game, &joint, eps + extra, 1e-9).unwrap());
        }
    }

    #[test]
    fn delta_bar_is_invariant_under_relabeling(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let game = common::small_random_game(&mut rng);
        let relabeled = relabel(&game, &mut rng);
        let (a, b) = (delta_bar(&game, 1e-10).unwrap(), delta_bar(&relabeled, 1e-10).unwrap());
        prop_assert!(a == b || (a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

/// Same game with states and every player's actions permuted.
fn relabel(game: &StochasticGame, rng: &mut StdRng) -> StochasticGame {
    fn perm(rng: &mut StdRng, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            p.swap(i, rng.random_range(0..=i));
        }
        p
    }
    let ns = game.num_states();
    // new label k refers to old label p[k]
    let sp = perm(rng, ns);
    let ap: Vec<Vec<usize>> = (0..game.players).map(|i| perm(rng, game.num_actions(i))).collect();
    let nj = game.num_joint_actions();
    let old_joint = |new_j: usize| {
        let new_a = game.decode_joint(new_j);
        let old_a: Vec<usize> = new_a.iter().enumerate().map(|(i, &a)| ap[i][a]).collect();
        game.joint_index(&old_a)
    };
    StochasticGame {
        players: game.players,
        states: sp.iter().map(|&s| game.states[s].clone()).collect(),
        actions: (0..game.players).map(|i| ap[i].iter().map(|&a| game.actions[i][a].clone()).collect()).collect(),
        discounts: game.discounts.clone(),
        costs: (0..game.players)
            .map(|i| (0..ns).map(|x| (0..nj).map(|j| game.costs[i][sp[x]][old_joint(j)]).collect()).collect())
            .collect(),
        kernel: (0..ns)
            .map(|x| (0..nj).map(|j| (0..ns).map(|y| game.kernel[sp[x]][old_joint(j)][sp[y]]).collect()).collect())
            .collect(),
        initial_dist: sp.iter().map(|&s| game.initial_dist[s]).collect(),
    }
}

#[test]
fn reference_best_response_matches_policy_iteration() {
    let game = build_sec6_game();
    let other = DeterministicPolicy::new(1, vec![0, 1]).to_stationary(2);
    let vi = q_star(&game, 0, std::slice::from_ref(&other), 1e-10).unwrap();
    let pi = q_star_policy_iteration(&game, 0, &[other]).unwrap();
    assert!(vi.distance(&pi) <= 1e-8);
    // values from an independent dense linear solve
    let expected = [[16.0 + 2.0 / 3.0, 18.0 + 2.0 / 3.0], [25.0, 28.0 + 1.0 / 3.0]];
    for (x, row) in expected.iter().enumerate() {
        for (u, want) in row.iter().enumerate() {
            assert!((vi.get(x, u) - want).abs() <= 1e-8, "{x} {u}: {}", vi.get(x, u));
        }
    }
}

#[test]
fn reference_equilibrium_values_agree() {
    let game = build_sec6_game();
    let joint = JointDeterministicPolicy::from_choices(vec![vec![0, 0], vec![0, 1]]);
    let stationary: Vec<_> = joint.policies.iter().map(|p| p.to_stationary(2)).collect();
    for player in 0..2 {
        let a = policy_value(&game, player, &stationary, 1e-12).unwrap();
        let b = policy_value_exact(&game, player, &stationary).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-8);
        }
    }
}

#[test]
fn delta_bar_is_stable_across_tolerances() {
    let game = build_sec6_game();
    let a = delta_bar(&game, 1e-8).unwrap();
    let b = delta_bar(&game, 1e-10).unwrap();
    assert!(a > 0.0 && (a - b).abs() <= 1e-6);
    assert!((b - 2.0).abs() <= 1e-6);
}

#[test]
fn perturbation_gap_grows_with_rho() {
    let game = build_sec6_game();
    let small = perturbation_gap(&game, &[0.01, 0.01]).unwrap();
    let mid = perturbation_gap(&game, &[0.05, 0.05]).unwrap();
    let large = perturbation_gap(&game, &[0.3, 0.3]).unwrap();
    assert!(small <= mid && mid <= large);
    // values from an independent dense linear solve
    for (got, want) in [(small, 0.06518), (mid, 0.32651), (large, 1.98308)] {
        assert!((got - want).abs() <= 1e-4, "{got} vs {want}");
    }
}

#[test]
fn behaviour_target_differs_from_baseline_target_by_at_most_the_gap() {
    let game = build_sec6_game();
    let gap = perturbation_gap(&game, &[0.05, 0.05]).unwrap();
    let joint = JointDeterministicPolicy::from_choices(vec![vec![1, 0], vec![1, 1]]);
    for player in 0..2 {
        let soft = behaviour_opponents(&game, &joint, player, &[0.05, 0.05]).unwrap();
        let hard = joint.opponents(&game, player);
        let d = q_star(&game, player, &soft, 1e-12).unwrap().distance(&q_star(&game, player, &hard, 1e-12).unwrap());
        assert!(d <= gap + 1e-9);
        assert_eq!(soft[0], soften_policy(&game, joint.get(1 - player), 0.05).unwrap());
    }
}
