#![allow(dead_code)]

use adql_core::StochasticGame;
use rand::Rng;

/// Random game with the given shape: costs uniform on `[0, 10]`, kernel rows
/// normalized uniform weights with occasional exact zeros.
pub fn random_game<R: Rng>(rng: &mut R, players: usize, states: usize, actions: &[usize], beta: f64) -> StochasticGame {
    let joint: usize = actions.iter().product();
    let costs = (0..players)
        .map(|_| (0..states).map(|_| (0..joint).map(|_| rng.random_range(0.0..=10.0)).collect()).collect())
        .collect();
    let kernel = (0..states).map(|_| (0..joint).map(|_| random_distribution(rng, states)).collect()).collect();
    StochasticGame {
        players,
        states: (0..states).map(|x| format!("x{x}")).collect(),
        actions: actions.iter().map(|&n| (0..n).map(|u| format!("u{u}")).collect()).collect(),
        discounts: vec![beta; players],
        costs,
        kernel,
        initial_dist: random_distribution(rng, states),
    }
}

pub fn random_distribution<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return w.iter().map(|x| x / total).collect();
        }
    }
}

/// Random game with 2 players, at most 3 states and at most 3 actions each.
pub fn small_random_game<R: Rng>(rng: &mut R) -> StochasticGame {
    let states = rng.random_range(1..=3);
    let actions = [rng.random_range(1..=3), rng.random_range(1..=3)];
    let beta = [0.0, 0.5, 0.9][rng.random_range(0..3)];
    random_game(rng, 2, states, &actions, beta)
}
