//! The stage-game loop: every agent learns from the same seeded primitive
//! randomness, revises its policy at its own phase boundaries, and the
//! baseline joint policy is recorded as a piecewise-constant trace.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use super::streams::RandomnessStreams;
use crate::agent::{Agent, AgentConfig, PhaseOutcome};
use crate::error::{Error, Result};
use crate::game::{inverse_cdf, ActionId, JointDeterministicPolicy, PlayerId, StateId, StochasticGame};
use crate::solver::{is_equilibrium, QTable};

/// Memoized 0-equilibrium test for deterministic joint policies.
///
/// Safe to share between concurrently running episodes; the cached verdicts
/// do not depend on evaluation order.
#[derive(Debug)]
pub struct EquilibriumOracle<'g> {
    game: &'g StochasticGame,
    tol: f64,
    cache: Mutex<HashMap<Vec<ActionId>, bool>>,
}

impl<'g> EquilibriumOracle<'g> {
    pub fn new(game: &'g StochasticGame, tol: f64) -> Self {
        Self { game, tol, cache: Mutex::new(HashMap::new()) }
    }

    pub fn is_equilibrium(&self, joint: &JointDeterministicPolicy) -> Result<bool> {
        let key: Vec<ActionId> = joint.policies.iter().flat_map(|p| p.choice.iter().copied()).collect();
        if let Some(&v) = self.cache.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let v = is_equilibrium(self.game, joint, 0.0, self.tol)?;
        self.cache.lock().unwrap().insert(key, v);
        Ok(v)
    }
}

/// Baseline joint policy in force from `start` until the next segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySegment {
    pub start: u64,
    pub policies: Vec<Vec<ActionId>>,
    pub equilibrium: bool,
}

/// One phase-boundary decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvent {
    pub time: u64,
    pub player: PlayerId,
    pub outcome: PhaseOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: u64,
    pub equilibrium: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<QTable>>,
}

/// Sparse record of one seeded episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub master_seed: u64,
    pub horizon: u64,
    pub initial_state: StateId,
    /// Phase boundaries `t^i_k` with `0 < t ≤ horizon`, per player.
    pub boundaries: Vec<Vec<u64>>,
    pub segments: Vec<PolicySegment>,
    pub events: Vec<PolicyEvent>,
    pub snapshots: Vec<Snapshot>,
    pub final_q: Vec<QTable>,
}

impl SimulationTrace {
    fn segment_at(&self, t: u64) -> Result<&PolicySegment> {
        if t > self.horizon {
            return Err(Error::BeyondHorizon { time: t, horizon: self.horizon });
        }
        let i = self.segments.partition_point(|s| s.start <= t);
        Ok(&self.segments[i - 1])
    }

    /// Whether `φ_t` is a 0-equilibrium.
    pub fn equilibrium_at(&self, t: u64) -> Result<bool> {
        Ok(self.segment_at(t)?.equilibrium)
    }

    /// `φ_t` as per-player action lists.
    pub fn policy_at(&self, t: u64) -> Result<&[Vec<ActionId>]> {
        Ok(&self.segment_at(t)?.policies)
    }

    /// Times at which the baseline joint policy changed.
    pub fn change_times(&self) -> impl Iterator<Item = u64> + '_ {
        self.segments.iter().skip(1).map(|s| s.start)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordOptions {
    pub times: Vec<u64>,
    /// Store every agent's Q-table at each recorded time.
    pub q_snapshots: bool,
}

/// What an observer sees after each stage game.
pub struct StepView<'a> {
    pub t: u64,
    pub state: StateId,
    pub actions: &'a [ActionId],
    pub next_state: StateId,
    pub agents: &'a [Agent],
}

/// Everything that determines an episode.
#[derive(Debug, Clone, Copy)]
pub struct Episode<'a> {
    pub game: &'a StochasticGame,
    pub configs: &'a [AgentConfig],
    pub schedule: &'a Schedule,
    pub streams: RandomnessStreams,
    pub horizon: u64,
}

impl<'a> Episode<'a> {
    fn check(&self) -> Result<()> {
        self.game.ensure_valid()?;
        if self.horizon == 0 {
            return Err(Error::Invalid("horizon must be positive".into()));
        }
        if self.configs.len() != self.game.players || self.schedule.num_players() != self.game.players {
            return Err(Error::Invalid(format!(
                "game has {} players but {} configs and a schedule for {}",
                self.game.players,
                self.configs.len(),
                self.schedule.num_players()
            )));
        }
        for (i, c) in self.configs.iter().enumerate() {
            if c.player != i {
                return Err(Error::Invalid(format!("config slot {i} holds player {}", c.player)));
            }
        }
        if self.schedule.horizon < self.horizon {
            return Err(Error::Invalid("schedule does not cover the horizon".into()));
        }
        Ok(())
    }

    fn initial_state(&self) -> StateId {
        inverse_cdf(&self.game.initial_dist, self.streams.initial_state_draw())
    }

    fn agents(&self) -> Result<Vec<Agent>> {
        self.configs.iter().map(|c| Agent::new(self.game, c, self.schedule.phase_length(c.player, 0))).collect()
    }

    pub fn run(&self, record: &RecordOptions, oracle: &EquilibriumOracle<'_>) -> Result<SimulationTrace> {
        self.run_observed(record, oracle, |_| {})
    }

    /// Runs the episode, calling `observer` after every stage game.
    pub fn run_observed<F>(
        &self,
        record: &RecordOptions,
        oracle: &EquilibriumOracle<'_>,
        mut observer: F,
    ) -> Result<SimulationTrace>
    where
        F: FnMut(&StepView<'_>),
    {
        self.check()?;
        let mut times = record.times.clone();
        times.sort_unstable();
        times.dedup();
        if let Some(&t) = times.iter().find(|&&t| t > self.horizon) {
            return Err(Error::BeyondHorizon { time: t, horizon: self.horizon });
        }

        let game = self.game;
        let streams = &self.streams;
        let mut agents = self.agents()?;
        let mut x = self.initial_state();
        let initial_state = x;

        let joint_of =
            |agents: &[Agent]| JointDeterministicPolicy::new(agents.iter().map(|a| a.baseline().clone()).collect());
        let segment = |start: u64, joint: JointDeterministicPolicy| -> Result<PolicySegment> {
            let equilibrium = oracle.is_equilibrium(&joint)?;
            let policies = joint.policies.into_iter().map(|p| p.choice).collect();
            Ok(PolicySegment { start, policies, equilibrium })
        };

        let mut segments = vec![segment(0, joint_of(&agents))?];
        let mut events = Vec::new();
        let mut snapshots = Vec::with_capacity(times.len());
        let mut next_record = times.iter().copied().peekable();
        let mut actions = vec![0; game.players];

        let mut t = 0u64;
        loop {
            if t > 0 {
                let mut changed = false;
                for agent in agents.iter_mut() {
                    if agent.state().next_update_time != t {
                        continue;
                    }
                    let i = agent.player();
                    let k = agent.state().phase_index as usize;
                    let next_len = self.schedule.phase_length(i, k + 1);
                    let outcome = agent.end_phase_update(
                        t,
                        streams.inertia_draw(i, t),
                        |set| streams.candidate_policy(i, t, set),
                        next_len,
                    )?;
                    changed |= outcome == PhaseOutcome::Switched;
                    events.push(PolicyEvent { time: t, player: i, outcome });
                }
                if changed {
                    let seg = segment(t, joint_of(&agents))?;
                    if seg.policies != segments.last().unwrap().policies {
                        segments.push(seg);
                    }
                }
            }
            if next_record.peek() == Some(&t) {
                next_record.next();
                snapshots.push(Snapshot {
                    time: t,
                    equilibrium: segments.last().unwrap().equilibrium,
                    q: record.q_snapshots.then(|| agents.iter().map(|a| a.q().clone()).collect()),
                });
            }
            if t == self.horizon {
                break;
            }
            let x_next = play_stage(game, streams, &mut agents, &mut actions, x, t);
            observer(&StepView { t, state: x, actions: &actions, next_state: x_next, agents: &agents });
            x = x_next;
            t += 1;
        }

        let boundaries = (0..game.players).map(|i| self.schedule.boundaries_within_horizon(i).collect()).collect();
        Ok(SimulationTrace {
            master_seed: streams.master_seed(),
            horizon: self.horizon,
            initial_state,
            boundaries,
            segments,
            events,
            snapshots,
            final_q: agents.into_iter().map(Agent::into_q).collect(),
        })
    }

    /// Q-learning with every baseline policy frozen at `frozen`, using this
    /// episode's own primitive draws. Phase boundaries are ignored.
    pub fn frozen_q_run(&self, frozen: &JointDeterministicPolicy, steps: u64) -> Result<Vec<QTable>> {
        self.frozen_q_run_observed(frozen, steps, |_| {})
    }

    pub fn frozen_q_run_observed<F>(
        &self,
        frozen: &JointDeterministicPolicy,
        steps: u64,
        mut observer: F,
    ) -> Result<Vec<QTable>>
    where
        F: FnMut(&StepView<'_>),
    {
        self.game.ensure_valid()?;
        frozen.check(self.game)?;
        if steps == 0 {
            return Err(Error::Invalid("steps must be positive".into()));
        }
        if self.configs.len() != self.game.players {
            return Err(Error::Invalid("one config per player is required".into()));
        }
        let mut agents = self
            .configs
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.initial_policy = frozen.get(c.player).clone();
                // no boundary is ever reached
                Agent::new(self.game, &c, u64::MAX)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut x = self.initial_state();
        let mut actions = vec![0; self.game.players];
        for t in 0..steps {
            let x_next = play_stage(self.game, &self.streams, &mut agents, &mut actions, x, t);
            observer(&StepView { t, state: x, actions: &actions, next_state: x_next, agents: &agents });
            x = x_next;
        }
        Ok(agents.into_iter().map(Agent::into_q).collect())
    }
}

/// One stage game at time `t`: actions, costs, transition, Q-updates.
#[inline]
fn play_stage(
    game: &StochasticGame,
    streams: &RandomnessStreams,
    agents: &mut [Agent],
    actions: &mut [ActionId],
    x: StateId,
    t: u64,
) -> StateId {
    for (slot, agent) in actions.iter_mut().zip(agents.iter()) {
        let i = agent.player();
        *slot =
            agent.select_action(x, streams.experiment_draw(i, t), streams.uniform_action(i, t, game.num_actions(i)));
    }
    let j = game.joint_index(actions);
    let x_next = inverse_cdf(game.kernel_row(x, j), streams.transition_draw(t));
    for (agent, &u) in agents.iter_mut().zip(actions.iter()) {
        let cost = game.cost(agent.player(), x, j);
        agent.q_update(x, u, cost, x_next);
    }
    x_next
}

/// Convenience form of [`Episode::run`].
pub fn run_episode(
    game: &StochasticGame,
    configs: &[AgentConfig],
    schedule: &Schedule,
    streams: RandomnessStreams,
    horizon: u64,
    record: &RecordOptions,
    oracle: &EquilibriumOracle<'_>,
) -> Result<SimulationTrace> {
    Episode { game, configs, schedule, streams, horizon }.run(record, oracle)
}

/// Convenience form of [`Episode::frozen_q_run`].
pub fn frozen_q_run(
    game: &StochasticGame,
    configs: &[AgentConfig],
    frozen: &JointDeterministicPolicy,
    streams: RandomnessStreams,
    steps: u64,
) -> Result<Vec<QTable>> {
    // the schedule is never consulted when policies are frozen
    let schedule = Schedule {
        t_min: 1,
        ratio: 1,
        horizon: steps,
        lengths: vec![Vec::new(); game.players],
        boundaries: vec![vec![0]; game.players],
    };
    Episode { game, configs, schedule: &schedule, streams, horizon: steps }.frozen_q_run(frozen, steps)
}

/// Fraction of traces whose baseline joint policy is a 0-equilibrium at each
/// requested time.
pub fn equilibrium_frequency(traces: &[SimulationTrace], times: &[u64]) -> Result<Vec<(u64, f64)>> {
    if traces.is_empty() {
        return Err(Error::Invalid("no traces".into()));
    }
    times
        .iter()
        .map(|&t| {
            let hits = traces
                .iter()
                .map(|tr| tr.equilibrium_at(t))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .filter(|&b| b)
                .count();
            Ok((t, hits as f64 / traces.len() as f64))
        })
        .collect()
}
