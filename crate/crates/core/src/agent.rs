//! A single learner running asynchronous decentralized Q-learning: constant
//! step-size Q-learning inside exploration phases, uniform experimentation,
//! and an inertial `δ`-greedy policy revision at each phase boundary.
//!
//! The agent holds no history beyond its Q-table and baseline policy, and
//! consumes no randomness of its own: every draw is supplied by the caller.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::game::{ActionId, DeterministicPolicy, PlayerId, StateId, StochasticGame};
use crate::solver::{br_hat_unchecked, BestResponseSet, QTable};

/// Scalar hyperparameters of one learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    /// Experimentation probability `ρ`.
    pub rho: f64,
    /// Inertia `λ`: probability of keeping a policy that failed the test.
    pub lambda: f64,
    /// Suboptimality tolerance `δ`.
    pub delta: f64,
    /// Constant step size `α`.
    pub alpha: f64,
}

impl LearningParams {
    /// Accepts `ρ, λ ∈ [0, 1]`, `α ∈ (0, 1]`, `δ > 0`. The closed ends
    /// are degenerate but well defined.
    pub fn validate(&self) -> Result<()> {
        check_range("rho", self.rho, 0.0, 1.0, false, false, "[0, 1]")?;
        check_range("lambda", self.lambda, 0.0, 1.0, false, false, "[0, 1]")?;
        check_range("delta", self.delta, 0.0, f64::INFINITY, true, true, "(0, inf)")?;
        check_range("alpha", self.alpha, 0.0, 1.0, true, false, "(0, 1]")?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub player: PlayerId,
    pub params: LearningParams,
    pub initial_policy: DeterministicPolicy,
    pub initial_q: QTable,
}

impl AgentConfig {
    /// Configuration with an all-zero initial Q-table.
    pub fn new(game: &StochasticGame, params: LearningParams, initial_policy: DeterministicPolicy) -> Self {
        let player = initial_policy.player;
        Self { player, params, initial_policy, initial_q: QTable::for_game(game, player) }
    }

    pub fn validate(&self, game: &StochasticGame) -> Result<()> {
        self.params.validate()?;
        game.check_player(self.player)?;
        if self.initial_policy.player != self.player || self.initial_q.player != self.player {
            return Err(Error::Invalid(format!("agent {} config mixes players", self.player)));
        }
        self.initial_policy.check(game)?;
        let na = game.num_actions(self.player);
        if self.initial_q.values.len() != game.num_states() || self.initial_q.values.iter().any(|r| r.len() != na) {
            return Err(Error::Invalid(format!("initial Q-table of agent {} has the wrong shape", self.player)));
        }
        if self.initial_q.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("initial Q-table of agent {} is not finite", self.player)));
        }
        Ok(())
    }
}

/// Live state of a learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub q: QTable,
    pub baseline: DeterministicPolicy,
    pub phase_index: u64,
    pub next_update_time: u64,
}

/// What happened at a phase boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseOutcome {
    /// Baseline was already `δ`-greedy.
    Retained,
    /// Baseline failed the test but inertia kept it.
    Inert,
    /// Baseline replaced by a uniform draw from the `δ`-greedy set.
    Switched,
}

#[derive(Debug, Clone)]
pub struct Agent {
    params: LearningParams,
    discount: f64,
    state: AgentState,
}

impl Agent {
    /// `first_phase_len` is `T^i_0`, so the first boundary is at that time.
    pub fn new(game: &StochasticGame, config: &AgentConfig, first_phase_len: u64) -> Result<Self> {
        config.validate(game)?;
        if first_phase_len == 0 {
            return Err(Error::Invalid("phase lengths must be positive".into()));
        }
        Ok(Self {
            params: config.params,
            discount: game.discounts[config.player],
            state: AgentState {
                q: config.initial_q.clone(),
                baseline: config.initial_policy.clone(),
                phase_index: 0,
                next_update_time: first_phase_len,
            },
        })
    }

    pub fn player(&self) -> PlayerId {
        self.state.baseline.player
    }

    pub fn params(&self) -> &LearningParams {
        &self.params
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn q(&self) -> &QTable {
        &self.state.q
    }

    pub fn baseline(&self) -> &DeterministicPolicy {
        &self.state.baseline
    }

    pub fn into_q(self) -> QTable {
        self.state.q
    }

    /// Follows the baseline unless `experiment_draw < ρ`, in which case the
    /// pre-drawn uniform action is played.
    #[inline]
    pub fn select_action(&self, x: StateId, experiment_draw: f64, uniform_action: ActionId) -> ActionId {
        if experiment_draw < self.params.rho {
            uniform_action
        } else {
            self.state.baseline.choice[x]
        }
    }

    /// `Q(x,u) ← (1−α)Q(x,u) + α(cost + β min_a Q(x_next, a))`, with the
    /// minimum taken on the table before this update.
    #[inline]
    pub fn q_update(&mut self, x: StateId, u: ActionId, cost: f64, x_next: StateId) {
        let q = &mut self.state.q;
        let target = cost + self.discount * q.row_min(x_next);
        let alpha = self.params.alpha;
        let old = q.get(x, u);
        q.set(x, u, (1.0 - alpha) * old + alpha * target);
    }

    /// Current `\hat{BR}_δ` set of the Q-table.
    pub fn candidate_set(&self) -> BestResponseSet {
        br_hat_unchecked(&self.state.q, self.params.delta)
    }

    /// Policy revision at the end of an exploration phase.
    ///
    /// `candidate` returns the pre-drawn uniform member of the set it is
    /// given; it is only consulted when a switch happens. `next_phase_len` is
    /// the length of the phase that starts at `t`.
    pub fn end_phase_update<F>(
        &mut self,
        t: u64,
        inertia_draw: f64,
        candidate: F,
        next_phase_len: u64,
    ) -> Result<PhaseOutcome>
    where
        F: FnOnce(&BestResponseSet) -> DeterministicPolicy,
    {
        if t != self.state.next_update_time {
            return Err(Error::NotABoundary { player: self.player(), time: t, next: self.state.next_update_time });
        }
        if next_phase_len == 0 {
            return Err(Error::Invalid("phase lengths must be positive".into()));
        }
        let set = self.candidate_set();
        let outcome = if set.contains(&self.state.baseline) {
            PhaseOutcome::Retained
        } else if inertia_draw < self.params.lambda {
            PhaseOutcome::Inert
        } else {
            let next = candidate(&set);
            debug_assert!(set.contains(&next));
            self.state.baseline = next;
            PhaseOutcome::Switched
        };
        self.state.phase_index += 1;
        self.state.next_update_time = t + next_phase_len;
        Ok(outcome)
    }
}

/// `M = max{‖Q̂_0‖∞, ‖c^i‖∞ / (1 − β^i)}`, the uniform bound on the Q-iterates.
pub fn q_bound(game: &StochasticGame, config: &AgentConfig) -> f64 {
    let beta = game.discounts[config.player];
    config.initial_q.sup_norm().max(game.cost_sup_norm(config.player) / (1.0 - beta))
}
