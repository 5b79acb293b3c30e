//! Model-based computations on a known game: optimal Q-functions against
//! fixed opponents, policy values, greedy best-response sets, equilibrium
//! tests and the hyperparameter diagnostics (`δ̄`, perturbation gap,
//! reachability) that the learning results depend on.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::game::{
    soften_policy, ActionId, DeterministicPolicy, JointDeterministicPolicy, PlayerId, StateId, StationaryPolicy,
    StochasticGame,
};

/// Default cap on the number of exact solves an enumeration may perform.
pub const DEFAULT_SOLVE_BUDGET: u128 = 1_000_000;

/// Tolerance used for the exact solves inside [`perturbation_gap`].
pub const PERTURBATION_TOL: f64 = 1e-10;

/// Tabular Q-function of one player, `values[state][own action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub player: PlayerId,
    pub values: Vec<Vec<f64>>,
}

impl QTable {
    pub fn zeros(player: PlayerId, num_states: usize, num_actions: usize) -> Self {
        Self { player, values: vec![vec![0.0; num_actions]; num_states] }
    }

    pub fn for_game(game: &StochasticGame, player: PlayerId) -> Self {
        Self::zeros(player, game.num_states(), game.num_actions(player))
    }

    #[inline]
    pub fn get(&self, state: StateId, action: ActionId) -> f64 {
        self.values[state][action]
    }

    #[inline]
    pub fn set(&mut self, state: StateId, action: ActionId, value: f64) {
        self.values[state][action] = value;
    }

    #[inline]
    pub fn row_min(&self, state: StateId) -> f64 {
        self.values[state].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn num_states(&self) -> usize {
        self.values.len()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Sup-norm distance; tables must have the same shape.
    pub fn distance(&self, other: &QTable) -> f64 {
        self.values.iter().flatten().zip(other.values.iter().flatten()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn greedy_policy(&self) -> DeterministicPolicy {
        let choice = self
            .values
            .iter()
            .map(|row| row.iter().enumerate().fold(0, |best, (a, &v)| if v < row[best] { a } else { best }))
            .collect();
        DeterministicPolicy::new(self.player, choice)
    }
}

/// The single-agent MDP one player faces when everyone else plays a fixed
/// stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedMdp {
    pub player: PlayerId,
    /// `cost[state][action]`
    pub cost: Vec<Vec<f64>>,
    /// `kernel[state][action][next_state]`
    pub kernel: Vec<Vec<Vec<f64>>>,
    pub discount: f64,
}

fn check_opponents(game: &StochasticGame, player: PlayerId, others: &[StationaryPolicy]) -> Result<()> {
    game.check_player(player)?;
    if others.len() + 1 != game.players {
        return Err(Error::Invalid(format!(
            "expected {} opponent policies for player {player}, got {}",
            game.players - 1,
            others.len()
        )));
    }
    let expected = (0..game.players).filter(|&j| j != player);
    for (pol, j) in others.iter().zip(expected) {
        if pol.player != j {
            return Err(Error::Invalid(format!(
                "opponent policies must be in player order; found player {} where {j} was expected",
                pol.player
            )));
        }
        pol.check(game)?;
    }
    Ok(())
}

/// Marginalizes the opponents' stationary policies out of the game.
///
/// `others` holds one policy per opponent in increasing player order.
pub fn induced_mdp(game: &StochasticGame, player: PlayerId, others: &[StationaryPolicy]) -> Result<InducedMdp> {
    check_opponents(game, player, others)?;
    let ns = game.num_states();
    let na = game.num_actions(player);
    let mut cost = vec![vec![0.0; na]; ns];
    let mut kernel = vec![vec![vec![0.0; ns]; na]; ns];
    for x in 0..ns {
        for j in 0..game.num_joint_actions() {
            let joint = game.decode_joint(j);
            let mut weight = 1.0;
            for pol in others {
                weight *= pol.probs[x][joint[pol.player]];
            }
            if weight == 0.0 {
                continue;
            }
            let own = joint[player];
            cost[x][own] += weight * game.cost(player, x, j);
            for (acc, &p) in kernel[x][own].iter_mut().zip(game.kernel_row(x, j)) {
                *acc += weight * p;
            }
        }
    }
    Ok(InducedMdp { player, cost, kernel, discount: game.discounts[player] })
}

impl InducedMdp {
    pub fn num_states(&self) -> usize {
        self.cost.len()
    }

    pub fn num_actions(&self) -> usize {
        self.cost.first().map_or(0, Vec::len)
    }

    /// One application of the Bellman optimality operator on Q-factors.
    pub fn bellman(&self, q: &QTable) -> QTable {
        let mins: Vec<f64> = (0..self.num_states()).map(|s| q.row_min(s)).collect();
        let values = self
            .cost
            .iter()
            .zip(&self.kernel)
            .map(|(costs, rows)| costs.iter().zip(rows).map(|(c, row)| c + self.discount * dot(row, &mins)).collect())
            .collect();
        QTable { player: self.player, values }
    }

    pub fn bellman_residual(&self, q: &QTable) -> f64 {
        self.bellman(q).distance(q)
    }

    /// Value iteration from the all-zero table; the result is within `tol`
    /// of the fixed point in sup-norm.
    pub fn value_iteration(&self, tol: f64) -> Result<QTable> {
        check_range("tol", tol, 0.0, f64::INFINITY, true, true, "(0, inf)")?;
        let mut q = QTable::zeros(self.player, self.num_states(), self.num_actions());
        if self.discount == 0.0 {
            return Ok(self.bellman(&q));
        }
        let stop = tol * (1.0 - self.discount) / (2.0 * self.discount);
        loop {
            let next = self.bellman(&q);
            let gap = next.distance(&q);
            q = next;
            if gap <= stop {
                return Ok(q);
            }
        }
    }

    /// Exact policy evaluation by a dense linear solve: `(I - βP_π) V = c_π`.
    pub fn evaluate(&self, policy: &[ActionId]) -> Vec<f64> {
        let ns = self.num_states();
        let rows: Vec<&[f64]> = (0..ns).map(|x| self.kernel[x][policy[x]].as_slice()).collect();
        let costs: Vec<f64> = (0..ns).map(|x| self.cost[x][policy[x]]).collect();
        solve_discounted(&rows, &costs, self.discount)
    }

    /// Howard policy iteration with exact evaluation. Independent of
    /// [`InducedMdp::value_iteration`]; used to cross-check it.
    pub fn policy_iteration(&self) -> QTable {
        let ns = self.num_states();
        let mut policy: Vec<ActionId> = (0..ns).map(|x| argmin(&self.cost[x])).collect();
        loop {
            let v = self.evaluate(&policy);
            let values: Vec<Vec<f64>> = self
                .cost
                .iter()
                .zip(&self.kernel)
                .map(|(costs, rows)| costs.iter().zip(rows).map(|(c, row)| c + self.discount * dot(row, &v)).collect())
                .collect();
            let mut changed = false;
            for x in 0..ns {
                let best = argmin(&values[x]);
                let current = values[x][policy[x]];
                let scale = 1.0 + current.abs();
                if values[x][best] < current - 1e-12 * scale {
                    policy[x] = best;
                    changed = true;
                }
            }
            if !changed {
                return QTable { player: self.player, values };
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmin(row: &[f64]) -> usize {
    row.iter().enumerate().fold(0, |best, (a, &v)| if v < row[best] { a } else { best })
}

fn solve_discounted(rows: &[&[f64]], costs: &[f64], discount: f64) -> Vec<f64> {
    let n = costs.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - discount * rows[i][j]
    });
    let b = DVector::from_column_slice(costs);
    let v = a.lu().solve(&b).expect("I - βP is invertible for β < 1 and stochastic P");
    v.iter().copied().collect()
}

/// Optimal Q-function of `player` against the opponents' stationary
/// policies, accurate to `tol` in sup-norm.
pub fn q_star(game: &StochasticGame, player: PlayerId, others: &[StationaryPolicy], tol: f64) -> Result<QTable> {
    check_range("tol", tol, 0.0, f64::INFINITY, true, true, "(0, inf)")?;
    induced_mdp(game, player, others)?.value_iteration(tol)
}

/// Same target as [`q_star`], computed by policy iteration.
pub fn q_star_policy_iteration(game: &StochasticGame, player: PlayerId, others: &[StationaryPolicy]) -> Result<QTable> {
    Ok(induced_mdp(game, player, others)?.policy_iteration())
}

/// Opponents of `player` in `joint`, each softened with its own `rho`.
pub fn behaviour_opponents(
    game: &StochasticGame,
    joint: &JointDeterministicPolicy,
    player: PlayerId,
    rhos: &[f64],
) -> Result<Vec<StationaryPolicy>> {
    joint.check(game)?;
    if rhos.len() != game.players {
        return Err(Error::Invalid(format!("expected {} rhos, got {}", game.players, rhos.len())));
    }
    joint.policies.iter().filter(|p| p.player != player).map(|p| soften_policy(game, p, rhos[p.player])).collect()
}

/// Expected per-state stage cost of `player` and state kernel under a full
/// joint stationary policy.
fn markov_chain(
    game: &StochasticGame,
    player: PlayerId,
    joint: &[StationaryPolicy],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    game.check_player(player)?;
    if joint.len() != game.players {
        return Err(Error::Invalid(format!("expected {} policies, got {}", game.players, joint.len())));
    }
    for (i, p) in joint.iter().enumerate() {
        if p.player != i {
            return Err(Error::Invalid(format!("joint slot {i} holds player {}", p.player)));
        }
        p.check(game)?;
    }
    let ns = game.num_states();
    let mut cost = vec![0.0; ns];
    let mut kernel = vec![vec![0.0; ns]; ns];
    for x in 0..ns {
        for j in 0..game.num_joint_actions() {
            let actions = game.decode_joint(j);
            let weight: f64 = joint.iter().map(|p| p.probs[x][actions[p.player]]).product();
            if weight == 0.0 {
                continue;
            }
            cost[x] += weight * game.cost(player, x, j);
            for (acc, &p) in kernel[x].iter_mut().zip(game.kernel_row(x, j)) {
                *acc += weight * p;
            }
        }
    }
    Ok((cost, kernel))
}

/// `J^i(π, s)` for every state, by successive approximation to within
/// `tol` in sup-norm.
pub fn policy_value(game: &StochasticGame, player: PlayerId, joint: &[StationaryPolicy], tol: f64) -> Result<Vec<f64>> {
    check_range("tol", tol, 0.0, f64::INFINITY, true, true, "(0, inf)")?;
    let (cost, kernel) = markov_chain(game, player, joint)?;
    let beta = game.discounts[player];
    if beta == 0.0 {
        return Ok(cost);
    }
    let stop = tol * (1.0 - beta) / (2.0 * beta);
    let mut v = vec![0.0; cost.len()];
    loop {
        let next: Vec<f64> = cost.iter().zip(&kernel).map(|(c, row)| c + beta * dot(row, &v)).collect();
        let gap = next.iter().zip(&v).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if gap <= stop {
            return Ok(v);
        }
    }
}

/// `J^i(π, s)` by a direct linear solve.
pub fn policy_value_exact(game: &StochasticGame, player: PlayerId, joint: &[StationaryPolicy]) -> Result<Vec<f64>> {
    let (cost, kernel) = markov_chain(game, player, joint)?;
    let rows: Vec<&[f64]> = kernel.iter().map(Vec::as_slice).collect();
    Ok(solve_discounted(&rows, &cost, game.discounts[player]))
}

/// The set of deterministic policies that are `eps`-greedy for a Q-table.
///
/// The set is a product over states, so it is stored as the admissible
/// actions of each state (sorted ascending).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BestResponseSet {
    pub player: PlayerId,
    pub allowed: Vec<Vec<ActionId>>,
}

impl BestResponseSet {
    pub fn len(&self) -> u128 {
        self.allowed.iter().map(|a| a.len() as u128).product()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.iter().any(Vec::is_empty)
    }

    pub fn contains(&self, policy: &DeterministicPolicy) -> bool {
        policy.choice.len() == self.allowed.len()
            && policy.choice.iter().zip(&self.allowed).all(|(a, set)| set.binary_search(a).is_ok())
    }

    /// The `index`-th member in mixed-radix order, state 0 most significant.
    pub fn nth(&self, mut index: u128) -> DeterministicPolicy {
        let mut choice = vec![0; self.allowed.len()];
        for (slot, set) in choice.iter_mut().zip(&self.allowed).rev() {
            let n = set.len() as u128;
            *slot = set[(index % n) as usize];
            index /= n;
        }
        DeterministicPolicy::new(self.player, choice)
    }

    pub fn iter(&self) -> impl Iterator<Item = DeterministicPolicy> + '_ {
        (0..self.len()).map(|i| self.nth(i))
    }
}

/// `\hat{BR}_eps(q)`: policies whose action in every state is within `eps`
/// of that state's minimum. Membership compares stored values exactly.
pub fn br_hat(q: &QTable, eps: f64) -> Result<BestResponseSet> {
    check_range("eps", eps, 0.0, f64::INFINITY, false, true, "[0, inf)")?;
    Ok(br_hat_unchecked(q, eps))
}

pub(crate) fn br_hat_unchecked(q: &QTable, eps: f64) -> BestResponseSet {
    let allowed = (0..q.num_states())
        .map(|x| {
            let bound = q.row_min(x) + eps;
            q.values[x].iter().enumerate().filter(|&(_, &v)| v <= bound).map(|(a, _)| a).collect()
        })
        .collect();
    BestResponseSet { player: q.player, allowed }
}

/// Whether every player's deterministic policy is an `eps`-best response to
/// the others, judged on exact Q-values with numerical slack `tol`.
pub fn is_equilibrium(game: &StochasticGame, joint: &JointDeterministicPolicy, eps: f64, tol: f64) -> Result<bool> {
    check_range("eps", eps, 0.0, f64::INFINITY, false, true, "[0, inf)")?;
    joint.check(game)?;
    for player in 0..game.players {
        let q = q_star(game, player, &joint.opponents(game, player), tol)?;
        let pol = joint.get(player);
        let ok = (0..game.num_states()).all(|x| q.get(x, pol.action(x)) <= q.row_min(x) + eps + tol);
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Enumerates deterministic joint policies of a subset of players.
#[derive(Debug, Clone)]
pub struct OpponentSpace {
    players: Vec<PlayerId>,
    counts: Vec<u128>,
    num_states: usize,
    action_counts: Vec<usize>,
    total: u128,
}

impl OpponentSpace {
    /// Deterministic joint policies of everyone except `player`.
    pub fn new(game: &StochasticGame, player: PlayerId) -> Result<Self> {
        let players: Vec<PlayerId> = (0..game.players).filter(|&j| j != player).collect();
        let mut counts = Vec::with_capacity(players.len());
        let mut total: u128 = 1;
        for &j in &players {
            let c = game.policy_count(j).ok_or_else(overflow)?;
            total = total.checked_mul(c).ok_or_else(overflow)?;
            counts.push(c);
        }
        Ok(Self { players, counts, num_states: game.num_states(), action_counts: game.action_counts(), total })
    }

    pub fn len(&self) -> u128 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Opponent policies for `index`, first opponent most significant.
    pub fn policies(&self, mut index: u128) -> Vec<DeterministicPolicy> {
        let mut out = Vec::with_capacity(self.players.len());
        for (&j, &c) in self.players.iter().zip(&self.counts).rev() {
            out.push(DeterministicPolicy::from_index(j, index % c, self.num_states, self.action_counts[j]));
            index /= c;
        }
        out.reverse();
        out
    }

    pub fn stationary(&self, index: u128) -> Vec<StationaryPolicy> {
        self.policies(index)
            .into_iter()
            .map(|p| {
                let na = self.action_counts[p.player];
                p.to_stationary(na)
            })
            .collect()
    }
}

fn overflow() -> Error {
    Error::BudgetExceeded { what: "policies", count: u128::MAX, budget: DEFAULT_SOLVE_BUDGET }
}

fn opponent_spaces(game: &StochasticGame, budget: u128) -> Result<Vec<OpponentSpace>> {
    let spaces = (0..game.players).map(|i| OpponentSpace::new(game, i)).collect::<Result<Vec<_>>>()?;
    let mut total: u128 = 0;
    for s in &spaces {
        total = total.saturating_add(s.len());
    }
    if total > budget {
        return Err(Error::BudgetExceeded { what: "exact solves", count: total, budget });
    }
    Ok(spaces)
}

/// `δ̄`: the smallest nonzero same-state gap between optimal Q-factors, over
/// all players and all deterministic opponent joint policies. Gaps below
/// `10·tol` are treated as ties. Returns `f64::INFINITY` when every gap is a
/// tie.
pub fn delta_bar(game: &StochasticGame, tol: f64) -> Result<f64> {
    delta_bar_with_budget(game, tol, DEFAULT_SOLVE_BUDGET)
}

pub fn delta_bar_with_budget(game: &StochasticGame, tol: f64, budget: u128) -> Result<f64> {
    check_range("tol", tol, 0.0, f64::INFINITY, true, true, "(0, inf)")?;
    game.ensure_valid()?;
    let spaces = opponent_spaces(game, budget)?;
    let zero = 10.0 * tol;
    let mut best = f64::INFINITY;
    for (player, space) in spaces.iter().enumerate() {
        let mins = (0..space.len())
            .into_par_iter()
            .map(|idx| {
                let q = q_star(game, player, &space.stationary(idx), tol)?;
                Ok(min_nonzero_gap(&q, zero))
            })
            .collect::<Result<Vec<f64>>>()?;
        best = mins.into_iter().fold(best, f64::min);
    }
    Ok(best)
}

fn min_nonzero_gap(q: &QTable, zero: f64) -> f64 {
    let mut best = f64::INFINITY;
    for row in &q.values {
        for (a, &x) in row.iter().enumerate() {
            for &y in &row[a + 1..] {
                let gap = (x - y).abs();
                if gap >= zero && gap < best {
                    best = gap;
                }
            }
        }
    }
    best
}

/// Largest sup-norm distance, over players `j` and deterministic opponent
/// joints, between the optimal Q-function against the opponents' baseline
/// policies and against their `rho`-softened behaviour policies.
pub fn perturbation_gap(game: &StochasticGame, rhos: &[f64]) -> Result<f64> {
    perturbation_gap_with_budget(game, rhos, DEFAULT_SOLVE_BUDGET)
}

pub fn perturbation_gap_with_budget(game: &StochasticGame, rhos: &[f64], budget: u128) -> Result<f64> {
    game.ensure_valid()?;
    if rhos.len() != game.players {
        return Err(Error::Invalid(format!("expected {} rhos, got {}", game.players, rhos.len())));
    }
    for &r in rhos {
        check_range("rho", r, 0.0, 1.0, false, true, "[0, 1)")?;
    }
    let spaces = opponent_spaces(game, budget / 2)?;
    let mut worst: f64 = 0.0;
    for (player, space) in spaces.iter().enumerate() {
        let gaps = (0..space.len())
            .into_par_iter()
            .map(|idx| {
                let base = space.policies(idx);
                let exact: Vec<StationaryPolicy> =
                    base.iter().map(|p| p.to_stationary(game.num_actions(p.player))).collect();
                let soft = base.iter().map(|p| soften_policy(game, p, rhos[p.player])).collect::<Result<Vec<_>>>()?;
                let q0 = q_star(game, player, &exact, PERTURBATION_TOL)?;
                let q1 = q_star(game, player, &soft, PERTURBATION_TOL)?;
                Ok(q0.distance(&q1))
            })
            .collect::<Result<Vec<f64>>>()?;
        worst = gaps.into_iter().fold(worst, f64::max);
    }
    Ok(worst)
}

/// Checks `gap < min_i min{δ^i, δ̄ − δ^i} / 4`.
pub fn perturbation_condition_holds(gap: f64, deltas: &[f64], delta_bar: f64) -> bool {
    let margin = deltas.iter().map(|&d| d.min(delta_bar - d)).fold(f64::INFINITY, f64::min);
    gap < margin / 4.0
}

/// True iff the state graph with an edge `s → s'` whenever some joint action
/// moves `s` to `s'` with positive probability is strongly connected.
pub fn check_reachability(game: &StochasticGame) -> bool {
    let ns = game.num_states();
    if ns <= 1 {
        return true;
    }
    let mut forward = vec![Vec::new(); ns];
    let mut backward = vec![Vec::new(); ns];
    for (s, rows) in game.kernel.iter().enumerate() {
        for t in 0..ns {
            if rows.iter().any(|row| row[t] > 0.0) {
                forward[s].push(t);
                backward[t].push(s);
            }
        }
    }
    reaches_all(&forward) && reaches_all(&backward)
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(s) = queue.pop_front() {
        for &t in &adj[s] {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    seen.into_iter().all(|v| v)
}
