//! Seeded, deterministic multi-agent episode execution.

mod episode;
mod schedule;
mod streams;

pub use episode::{
    equilibrium_frequency, frozen_q_run, run_episode, Episode, EquilibriumOracle, PolicyEvent, PolicySegment,
    RecordOptions, SimulationTrace, Snapshot, StepView,
};
pub use schedule::{active_phases, draw_schedule, ActivePhase, ActivePhases, Schedule};
pub use streams::{Family, RandomnessStreams};
