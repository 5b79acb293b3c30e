//! Asynchronous decentralized Q-learning in finite stochastic games.
//!
//! The crate provides the game model, exact solvers used as reference
//! oracles, best-response graph analysis, the learning agent, and a seeded
//! multi-agent simulator with experiment plumbing.

pub mod acyclicity;
pub mod agent;
pub mod error;
pub mod experiment;
pub mod game;
pub mod orchestrator;
pub mod solver;

pub use acyclicity::{build_br_graph, is_weakly_acyclic, p_min, path_bound_l, theta_and_xi, BrEdge, BrGraph};
pub use agent::{Agent, AgentConfig, AgentState, LearningParams, PhaseOutcome};
pub use error::{Error, Result};
pub use experiment::{
    analyze_game, build_sec6_game, run_experiment, AnalysisParams, AnalysisReport, ExperimentConfig, ExperimentResult,
    GameSource,
};
pub use game::{
    sample_transition, soften_policy, validate_game, ActionId, DeterministicPolicy, JointDeterministicPolicy, PlayerId,
    StateId, StationaryPolicy, StochasticGame, Violation,
};
pub use orchestrator::{
    active_phases, draw_schedule, equilibrium_frequency, frozen_q_run, run_episode, ActivePhase, Episode,
    RandomnessStreams, Schedule, SimulationTrace,
};
pub use solver::{
    br_hat, check_reachability, delta_bar, is_equilibrium, perturbation_gap, policy_value, q_star, BestResponseSet,
    QTable,
};
