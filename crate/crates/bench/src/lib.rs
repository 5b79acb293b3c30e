//! Shared fixtures for the benchmarks.

use adql_core::experiment::sec6_params;
use adql_core::{build_sec6_game, AgentConfig, RandomnessStreams, StochasticGame};

/// Zero-Q agents with seeded uniform initial policies for `game`.
pub fn seeded_configs(game: &StochasticGame, streams: &RandomnessStreams) -> Vec<AgentConfig> {
    (0..game.players).map(|i| AgentConfig::new(game, sec6_params(), streams.initial_policy(game, i))).collect()
}

pub fn reference_game() -> StochasticGame {
    build_sec6_game()
}
