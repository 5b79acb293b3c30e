//! Finite stochastic games, stationary policies and the noise-driven
//! transition map.
//!
//! Joint actions are stored as a single index in row-major order of player
//! index: player 0 is the most significant digit, so for two players with
//! `|U^0| = 2` and `|U^1| = 3` the joint action `(a, b)` has index `3 * a + b`.
//! Costs are laid out as `costs[player][state][joint]` and the kernel as
//! `kernel[state][joint][next_state]`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

pub type PlayerId = usize;
pub type StateId = usize;
pub type ActionId = usize;

/// Probability mass tolerance for kernel rows and the initial distribution.
pub const PROB_TOL: f64 = 1e-12;

/// A finite N-player discounted stochastic game.
///
/// The JSON form uses exactly these field names. Values are not checked on
/// deserialization; call [`StochasticGame::validate`] or load through
/// [`StochasticGame::from_json_str`], which rejects invalid games.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticGame {
    pub players: usize,
    pub states: Vec<String>,
    pub actions: Vec<Vec<String>>,
    pub discounts: Vec<f64>,
    pub costs: Vec<Vec<Vec<f64>>>,
    pub kernel: Vec<Vec<Vec<f64>>>,
    pub initial_dist: Vec<f64>,
}

/// A single failed invariant of a [`StochasticGame`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoPlayers,
    NoStates,
    PlayerCount { field: &'static str, expected: usize, found: usize },
    NoActions { player: PlayerId },
    Shape { field: &'static str, index: Vec<usize>, expected: usize, found: usize },
    Discount { player: PlayerId, value: f64 },
    NonFiniteCost { player: PlayerId, state: StateId, joint_action: usize },
    NegativeProbability { state: StateId, joint_action: usize, next_state: StateId, value: f64 },
    KernelRowSum { state: StateId, joint_action: usize, sum: f64 },
    InitialDistNegative { state: StateId, value: f64 },
    InitialDistSum { sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoPlayers => write!(f, "game has no players"),
            Violation::NoStates => write!(f, "game has no states"),
            Violation::PlayerCount { field, expected, found } => {
                write!(f, "`{field}` has {found} entries, expected one per player ({expected})")
            }
            Violation::NoActions { player } => write!(f, "player {player} has no actions"),
            Violation::Shape { field, index, expected, found } => {
                write!(f, "`{field}` at {index:?} has length {found}, expected {expected}")
            }
            Violation::Discount { player, value } => {
                write!(f, "discount of player {player} is {value}, must lie in [0, 1)")
            }
            Violation::NonFiniteCost { player, state, joint_action } => {
                write!(f, "cost of player {player} at state {state}, joint action {joint_action} is not finite")
            }
            Violation::NegativeProbability { state, joint_action, next_state, value } => {
                write!(f, "kernel entry (state {state}, joint action {joint_action}) -> {next_state} is {value}")
            }
            Violation::KernelRowSum { state, joint_action, sum } => {
                write!(f, "kernel row (state {state}, joint action {joint_action}) sums to {sum}")
            }
            Violation::InitialDistNegative { state, value } => {
                write!(f, "initial_dist[{state}] = {value} is negative")
            }
            Violation::InitialDistSum { sum } => write!(f, "initial_dist sums to {sum}"),
        }
    }
}

impl StochasticGame {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self, player: PlayerId) -> usize {
        self.actions[player].len()
    }

    pub fn action_counts(&self) -> Vec<usize> {
        self.actions.iter().map(Vec::len).collect()
    }

    pub fn num_joint_actions(&self) -> usize {
        self.actions.iter().map(Vec::len).product()
    }

    /// Row-major joint action index, player 0 most significant.
    pub fn joint_index(&self, joint: &[ActionId]) -> usize {
        debug_assert_eq!(joint.len(), self.players);
        joint.iter().zip(&self.actions).fold(0, |acc, (&a, set)| acc * set.len() + a)
    }

    pub fn decode_joint(&self, mut index: usize) -> Vec<ActionId> {
        let mut joint = vec![0; self.players];
        for (slot, set) in joint.iter_mut().zip(&self.actions).rev() {
            *slot = index % set.len();
            index /= set.len();
        }
        joint
    }

    pub fn cost(&self, player: PlayerId, state: StateId, joint_index: usize) -> f64 {
        self.costs[player][state][joint_index]
    }

    pub fn kernel_row(&self, state: StateId, joint_index: usize) -> &[f64] {
        &self.kernel[state][joint_index]
    }

    /// Largest absolute stage cost of one player.
    pub fn cost_sup_norm(&self, player: PlayerId) -> f64 {
        self.costs[player].iter().flatten().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// Returns every failed invariant; empty means the game is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.players;
        if n == 0 {
            out.push(Violation::NoPlayers);
        }
        let ns = self.states.len();
        if ns == 0 {
            out.push(Violation::NoStates);
        }
        for (field, found) in
            [("actions", self.actions.len()), ("discounts", self.discounts.len()), ("costs", self.costs.len())]
        {
            if found != n {
                out.push(Violation::PlayerCount { field, expected: n, found });
            }
        }
        if !out.is_empty() {
            return out;
        }
        for (player, set) in self.actions.iter().enumerate() {
            if set.is_empty() {
                out.push(Violation::NoActions { player });
            }
        }
        if !out.is_empty() {
            return out;
        }
        for (player, &b) in self.discounts.iter().enumerate() {
            if !(0.0..1.0).contains(&b) {
                out.push(Violation::Discount { player, value: b });
            }
        }

        let nj = self.num_joint_actions();
        for (player, table) in self.costs.iter().enumerate() {
            if table.len() != ns {
                out.push(shape("costs", vec![player], ns, table.len()));
                continue;
            }
            for (state, row) in table.iter().enumerate() {
                if row.len() != nj {
                    out.push(shape("costs", vec![player, state], nj, row.len()));
                    continue;
                }
                for (joint_action, c) in row.iter().enumerate() {
                    if !c.is_finite() {
                        out.push(Violation::NonFiniteCost { player, state, joint_action });
                    }
                }
            }
        }

        if self.kernel.len() != ns {
            out.push(shape("kernel", vec![], ns, self.kernel.len()));
        } else {
            for (state, rows) in self.kernel.iter().enumerate() {
                if rows.len() != nj {
                    out.push(shape("kernel", vec![state], nj, rows.len()));
                    continue;
                }
                for (joint_action, row) in rows.iter().enumerate() {
                    if row.len() != ns {
                        out.push(shape("kernel", vec![state, joint_action], ns, row.len()));
                        continue;
                    }
                    let mut bad = false;
                    for (next_state, &p) in row.iter().enumerate() {
                        if p.is_nan() || p < 0.0 {
                            bad = true;
                            out.push(Violation::NegativeProbability { state, joint_action, next_state, value: p });
                        }
                    }
                    let sum: f64 = row.iter().sum();
                    if !bad && (sum - 1.0).abs() > PROB_TOL {
                        out.push(Violation::KernelRowSum { state, joint_action, sum });
                    }
                }
            }
        }

        if self.initial_dist.len() != ns {
            out.push(shape("initial_dist", vec![], ns, self.initial_dist.len()));
        } else {
            let mut bad = false;
            for (state, &p) in self.initial_dist.iter().enumerate() {
                if p.is_nan() || p < 0.0 {
                    bad = true;
                    out.push(Violation::InitialDistNegative { state, value: p });
                }
            }
            let sum: f64 = self.initial_dist.iter().sum();
            if !bad && (sum - 1.0).abs() > PROB_TOL {
                out.push(Violation::InitialDistSum { sum });
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGame(v))
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let game: StochasticGame = serde_json::from_str(s)?;
        game.ensure_valid()?;
        Ok(game)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn check_player(&self, player: PlayerId) -> Result<()> {
        if player < self.players {
            Ok(())
        } else {
            Err(Error::InvalidId { kind: "player", id: player, limit: self.players })
        }
    }

    pub fn check_state(&self, state: StateId) -> Result<()> {
        if state < self.num_states() {
            Ok(())
        } else {
            Err(Error::InvalidId { kind: "state", id: state, limit: self.num_states() })
        }
    }

    /// Number of deterministic stationary policies of one player, `|U^i|^{|X|}`,
    /// or `None` on overflow.
    pub fn policy_count(&self, player: PlayerId) -> Option<u128> {
        checked_pow(self.num_actions(player) as u128, self.num_states())
    }
}

fn shape(field: &'static str, index: Vec<usize>, expected: usize, found: usize) -> Violation {
    Violation::Shape { field, index, expected, found }
}

pub(crate) fn checked_pow(base: u128, exp: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Free-function form of [`StochasticGame::validate`].
pub fn validate_game(game: &StochasticGame) -> Vec<Violation> {
    game.validate()
}

/// A deterministic stationary policy: one action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    pub player: PlayerId,
    pub choice: Vec<ActionId>,
}

impl DeterministicPolicy {
    pub fn new(player: PlayerId, choice: Vec<ActionId>) -> Self {
        Self { player, choice }
    }

    pub fn action(&self, state: StateId) -> ActionId {
        self.choice[state]
    }

    pub fn check(&self, game: &StochasticGame) -> Result<()> {
        game.check_player(self.player)?;
        if self.choice.len() != game.num_states() {
            return Err(Error::Invalid(format!(
                "policy of player {} covers {} states, game has {}",
                self.player,
                self.choice.len(),
                game.num_states()
            )));
        }
        let na = game.num_actions(self.player);
        for &a in &self.choice {
            if a >= na {
                return Err(Error::InvalidId { kind: "action", id: a, limit: na });
            }
        }
        Ok(())
    }

    /// Mixed-radix index in `Γ^i_SD`, state 0 most significant.
    pub fn index(&self, num_actions: usize) -> u128 {
        self.choice.iter().fold(0u128, |acc, &a| acc * num_actions as u128 + a as u128)
    }

    pub fn from_index(player: PlayerId, mut index: u128, num_states: usize, num_actions: usize) -> Self {
        let mut choice = vec![0; num_states];
        for slot in choice.iter_mut().rev() {
            *slot = (index % num_actions as u128) as usize;
            index /= num_actions as u128;
        }
        Self { player, choice }
    }

    pub fn to_stationary(&self, num_actions: usize) -> StationaryPolicy {
        let probs = self
            .choice
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; num_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        StationaryPolicy { player: self.player, probs }
    }
}

/// A randomized stationary policy, `probs[state][action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    pub player: PlayerId,
    pub probs: Vec<Vec<f64>>,
}

impl StationaryPolicy {
    pub fn check(&self, game: &StochasticGame) -> Result<()> {
        game.check_player(self.player)?;
        let na = game.num_actions(self.player);
        if self.probs.len() != game.num_states() || self.probs.iter().any(|r| r.len() != na) {
            return Err(Error::Invalid(format!("stationary policy of player {} has the wrong shape", self.player)));
        }
        for row in &self.probs {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| p.is_nan() || p < 0.0) || (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::Invalid(format!(
                    "stationary policy of player {} has a row that is not a distribution",
                    self.player
                )));
            }
        }
        Ok(())
    }

    /// True iff every action has probability at least `xi` in every state.
    pub fn is_soft(&self, xi: f64) -> bool {
        self.probs.iter().flatten().all(|&p| p >= xi)
    }
}

/// One deterministic policy per player, in player order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointDeterministicPolicy {
    pub policies: Vec<DeterministicPolicy>,
}

impl JointDeterministicPolicy {
    pub fn new(policies: Vec<DeterministicPolicy>) -> Self {
        Self { policies }
    }

    /// Builds a joint policy from per-player action lists.
    pub fn from_choices(choices: Vec<Vec<ActionId>>) -> Self {
        Self { policies: choices.into_iter().enumerate().map(|(i, c)| DeterministicPolicy::new(i, c)).collect() }
    }

    pub fn get(&self, player: PlayerId) -> &DeterministicPolicy {
        &self.policies[player]
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn check(&self, game: &StochasticGame) -> Result<()> {
        if self.policies.len() != game.players {
            return Err(Error::Invalid(format!(
                "joint policy has {} entries for {} players",
                self.policies.len(),
                game.players
            )));
        }
        for (i, p) in self.policies.iter().enumerate() {
            if p.player != i {
                return Err(Error::Invalid(format!("joint policy slot {i} holds player {}", p.player)));
            }
            p.check(game)?;
        }
        Ok(())
    }

    /// Joint action played in `state` when nobody experiments.
    pub fn joint_action(&self, state: StateId) -> Vec<ActionId> {
        self.policies.iter().map(|p| p.choice[state]).collect()
    }

    /// Policies of every player except `player`, as stationary indicator policies.
    pub fn opponents(&self, game: &StochasticGame, player: PlayerId) -> Vec<StationaryPolicy> {
        self.policies
            .iter()
            .filter(|p| p.player != player)
            .map(|p| p.to_stationary(game.num_actions(p.player)))
            .collect()
    }

    pub fn with_policy(&self, policy: DeterministicPolicy) -> Self {
        let mut next = self.clone();
        let slot = policy.player;
        next.policies[slot] = policy;
        next
    }
}

/// Behaviour policy: follow `policy` w.p. `1 - rho`, mix uniformly w.p. `rho`.
pub fn soften_policy(game: &StochasticGame, policy: &DeterministicPolicy, rho: f64) -> Result<StationaryPolicy> {
    check_range("rho", rho, 0.0, 1.0, false, false, "[0, 1]")?;
    policy.check(game)?;
    let na = game.num_actions(policy.player);
    let floor = rho / na as f64;
    let probs = policy
        .choice
        .iter()
        .map(|&chosen| (0..na).map(|a| if a == chosen { (1.0 - rho) + floor } else { floor }).collect())
        .collect();
    Ok(StationaryPolicy { player: policy.player, probs })
}

/// Inverse-CDF transition map: the first next state whose cumulative kernel
/// mass strictly exceeds `w`. When no state qualifies (for instance
/// `w == 1`), the last state with positive mass is returned.
pub fn sample_transition(game: &StochasticGame, state: StateId, joint_index: usize, w: f64) -> Result<StateId> {
    game.check_state(state)?;
    let nj = game.num_joint_actions();
    if joint_index >= nj {
        return Err(Error::InvalidId { kind: "joint action", id: joint_index, limit: nj });
    }
    check_range("w", w, 0.0, 1.0, false, false, "[0, 1]")?;
    Ok(inverse_cdf(game.kernel_row(state, joint_index), w))
}

/// Inverse-CDF selection over a probability row, same boundary rule as
/// [`sample_transition`].
pub fn inverse_cdf(row: &[f64], w: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (s, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last_positive = s;
        }
        cum += p;
        if cum > w {
            return s;
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_game() -> StochasticGame {
        StochasticGame {
            players: 2,
            states: vec!["s0".into(), "s1".into()],
            actions: vec![vec!["a0".into(), "a1".into()], vec!["b0".into(), "b1".into(), "b2".into()]],
            discounts: vec![0.5, 0.9],
            costs: vec![vec![vec![1.0; 6]; 2], vec![vec![2.0; 6]; 2]],
            kernel: vec![vec![vec![0.25, 0.75]; 6]; 2],
            initial_dist: vec![1.0, 0.0],
        }
    }

    #[test]
    fn joint_index_is_row_major() {
        let g = two_state_game();
        assert_eq!(g.joint_index(&[0, 0]), 0);
        assert_eq!(g.joint_index(&[0, 2]), 2);
        assert_eq!(g.joint_index(&[1, 0]), 3);
        assert_eq!(g.joint_index(&[1, 2]), 5);
        for j in 0..6 {
            assert_eq!(g.joint_index(&g.decode_joint(j)), j);
        }
    }

    #[test]
    fn valid_game_has_no_violations() {
        assert!(two_state_game().validate().is_empty());
    }

    #[test]
    fn short_kernel_row_is_named() {
        let mut g = two_state_game();
        g.kernel[1][4] = vec![0.2, 0.7];
        let v = g.validate();
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::KernelRowSum { state, joint_action, sum } => {
                assert_eq!((*state, *joint_action), (1, 4));
                assert!((sum - 0.9).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unit_discount_is_rejected() {
        let mut g = two_state_game();
        g.discounts[0] = 1.0;
        let v = g.validate();
        assert_eq!(v, vec![Violation::Discount { player: 0, value: 1.0 }]);
    }

    #[test]
    fn non_finite_cost_and_bad_initial_dist() {
        let mut g = two_state_game();
        g.costs[1][0][3] = f64::NAN;
        g.initial_dist = vec![0.5, 0.4];
        let v = g.validate();
        assert!(v.contains(&Violation::NonFiniteCost { player: 1, state: 0, joint_action: 3 }));
        assert!(v.iter().any(|x| matches!(x, Violation::InitialDistSum { .. })));
    }

    #[test]
    fn wrong_shapes_are_reported() {
        let mut g = two_state_game();
        g.costs[0].pop();
        g.discounts.push(0.1);
        assert!(matches!(g.validate()[0], Violation::PlayerCount { field: "discounts", .. }));
        g.discounts.pop();
        assert!(matches!(g.validate()[0], Violation::Shape { field: "costs", .. }));
    }

    #[test]
    fn single_action_players_are_allowed() {
        let mut g = two_state_game();
        g.actions[1] = vec!["only".into()];
        g.costs = vec![vec![vec![0.0; 2]; 2]; 2];
        g.kernel = vec![vec![vec![1.0, 0.0]; 2]; 2];
        assert!(g.validate().is_empty());
    }

    #[test]
    fn json_round_trip_rejects_invalid() {
        let g = two_state_game();
        let s = g.to_json_string().unwrap();
        assert_eq!(StochasticGame::from_json_str(&s).unwrap(), g);
        let mut bad = g.clone();
        bad.initial_dist = vec![0.3, 0.3];
        let s = serde_json::to_string(&bad).unwrap();
        assert!(matches!(StochasticGame::from_json_str(&s), Err(Error::InvalidGame(_))));
    }

    #[test]
    fn soften_identity_uniform_and_reference_value() {
        let g = two_state_game();
        let p = DeterministicPolicy::new(0, vec![0, 1]);
        let same = soften_policy(&g, &p, 0.0).unwrap();
        assert_eq!(same, p.to_stationary(2));
        let uni = soften_policy(&g, &p, 1.0).unwrap();
        assert!(uni.probs.iter().flatten().all(|&x| x == 0.5));
        let s = soften_policy(&g, &p, 0.05).unwrap();
        assert!((s.probs[0][0] - 0.975).abs() < 1e-15);
        assert!((s.probs[0][1] - 0.025).abs() < 1e-15);
        assert!(s.is_soft(0.025));
        assert!(!s.is_soft(0.026));
        assert!(soften_policy(&g, &p, 1.5).is_err());
        assert!(soften_policy(&g, &p, -0.1).is_err());
    }

    #[test]
    fn inverse_cdf_boundaries() {
        assert_eq!(inverse_cdf(&[1.0, 0.0], 0.0), 0);
        assert_eq!(inverse_cdf(&[1.0, 0.0], 0.999), 0);
        assert_eq!(inverse_cdf(&[1.0, 0.0], 1.0), 0);
        assert_eq!(inverse_cdf(&[0.25, 0.75], 0.2), 0);
        // w on a boundary goes to the later state
        assert_eq!(inverse_cdf(&[0.25, 0.75], 0.25), 1);
        assert_eq!(inverse_cdf(&[0.5, 0.5, 0.0], 1.0), 1);
    }

    #[test]
    fn sample_transition_rejects_bad_ids() {
        let g = two_state_game();
        assert!(sample_transition(&g, 2, 0, 0.1).is_err());
        assert!(sample_transition(&g, 0, 6, 0.1).is_err());
        assert!(sample_transition(&g, 0, 0, 1.1).is_err());
        assert_eq!(sample_transition(&g, 1, 5, 0.2).unwrap(), 0);
    }

    #[test]
    fn policy_index_round_trip() {
        for idx in 0..27u128 {
            let p = DeterministicPolicy::from_index(1, idx, 3, 3);
            assert_eq!(p.index(3), idx);
        }
        assert_eq!(DeterministicPolicy::from_index(0, 1, 2, 2).choice, vec![0, 1]);
    }

    proptest::proptest! {
        #[test]
        fn softened_argmax_is_original(rho in 0.0..1.0f64, na in 2usize..6, chosen in 0usize..6) {
            let chosen = chosen % na;
            let mut g = two_state_game();
            g.actions[0] = (0..na).map(|a| format!("a{a}")).collect();
            let p = DeterministicPolicy::new(0, vec![chosen, chosen]);
            let s = soften_policy(&g, &p, rho).unwrap();
            for row in &s.probs {
                let sum: f64 = row.iter().sum();
                proptest::prop_assert!((sum - 1.0).abs() < 1e-12);
                let best = row.iter().enumerate().fold(0, |b, (a, &v)| if v > row[b] { a } else { b });
                if rho < 1.0 {
                    proptest::prop_assert_eq!(best, chosen);
                }
            }
        }
    }
}
