//! Strict best-response graph over deterministic joint policies and the
//! weak-acyclicity certificate built from it, plus the closed-form
//! diagnostics `p_min`, `θ` and `ξ` that quantify the convergence argument.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::game::{DeterministicPolicy, JointDeterministicPolicy, PlayerId, StochasticGame};
use crate::solver::{br_hat_unchecked, q_star, BestResponseSet, OpponentSpace};

/// Largest joint-policy space the graph builder will enumerate.
pub const DEFAULT_NODE_BUDGET: u128 = 1_000_000;

/// Default slack for best-response membership on exact Q-values.
pub const DEFAULT_BR_TOL: f64 = 1e-9;

/// Indexes `Γ_SD = Γ^0_SD × … × Γ^{N-1}_SD` in mixed radix, player 0 most
/// significant.
#[derive(Debug, Clone)]
pub struct JointPolicySpace {
    counts: Vec<usize>,
    num_states: usize,
    action_counts: Vec<usize>,
    total: usize,
}

impl JointPolicySpace {
    pub fn new(game: &StochasticGame, budget: u128) -> Result<Self> {
        let mut total: u128 = 1;
        let mut counts = Vec::with_capacity(game.players);
        for i in 0..game.players {
            let c = game.policy_count(i);
            total = c.and_then(|c| total.checked_mul(c)).unwrap_or(u128::MAX);
            if total > budget {
                return Err(Error::BudgetExceeded { what: "joint policies", count: total, budget });
            }
            counts.push(c.unwrap_or(u128::MAX) as usize);
        }
        Ok(Self { counts, num_states: game.num_states(), action_counts: game.action_counts(), total: total as usize })
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut d = vec![0; self.counts.len()];
        for (slot, &c) in d.iter_mut().zip(&self.counts).rev() {
            *slot = index % c;
            index /= c;
        }
        d
    }

    pub fn index_of_digits(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.counts).fold(0, |acc, (&d, &c)| acc * c + d)
    }

    pub fn joint(&self, index: usize) -> JointDeterministicPolicy {
        let policies = self
            .digits(index)
            .into_iter()
            .enumerate()
            .map(|(i, d)| DeterministicPolicy::from_index(i, d as u128, self.num_states, self.action_counts[i]))
            .collect();
        JointDeterministicPolicy::new(policies)
    }

    pub fn index_of(&self, joint: &JointDeterministicPolicy) -> usize {
        let digits: Vec<usize> =
            joint.policies.iter().map(|p| p.index(self.action_counts[p.player]) as usize).collect();
        self.index_of_digits(&digits)
    }

    /// Index of the opponents' joint policy in [`OpponentSpace`] order.
    fn opponent_index(&self, digits: &[usize], player: PlayerId) -> usize {
        digits
            .iter()
            .zip(&self.counts)
            .enumerate()
            .filter(|&(j, _)| j != player)
            .fold(0, |acc, (_, (&d, &c))| acc * c + d)
    }
}

/// Directed edge of the strict best-response graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrEdge {
    pub from: usize,
    pub to: usize,
    pub deviator: PlayerId,
}

/// Strict best-response graph over all deterministic joint policies.
///
/// `path_len[n]` is the length of a shortest strict best-response path from
/// node `n` to an equilibrium, `None` if no such path exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrGraph {
    pub nodes: Vec<JointDeterministicPolicy>,
    pub edges: Vec<BrEdge>,
    pub equilibria: Vec<usize>,
    pub path_len: Vec<Option<usize>>,
}

impl BrGraph {
    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = &BrEdge> {
        // edges are emitted grouped by source in node order
        let start = self.edges.partition_point(|e| e.from < node);
        self.edges[start..].iter().take_while(move |e| e.from == node)
    }

    pub fn is_equilibrium(&self, node: usize) -> bool {
        self.equilibria.binary_search(&node).is_ok()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn build_br_graph(game: &StochasticGame, tol: f64) -> Result<BrGraph> {
    build_br_graph_with_budget(game, tol, DEFAULT_NODE_BUDGET)
}

/// Builds the graph. An edge `π → π'` exists iff exactly one player `i`
/// changes policy and `π'^i` is 0-greedy (with slack `tol`) for the exact
/// `Q*^i` against `π^{-i}`.
pub fn build_br_graph_with_budget(game: &StochasticGame, tol: f64, budget: u128) -> Result<BrGraph> {
    check_range("tol", tol, 0.0, f64::INFINITY, true, true, "(0, inf)")?;
    game.ensure_valid()?;
    let space = JointPolicySpace::new(game, budget)?;

    // Best-response sets depend only on (player, opponents' joint policy).
    let br_sets: Vec<Vec<BestResponseSet>> = (0..game.players)
        .map(|player| {
            let opponents = OpponentSpace::new(game, player)?;
            (0..opponents.len())
                .into_par_iter()
                .map(|o| {
                    let q = q_star(game, player, &opponents.stationary(o), tol)?;
                    Ok(br_hat_unchecked(&q, tol))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let per_node: Vec<(Vec<BrEdge>, bool)> = (0..space.len())
        .into_par_iter()
        .map(|node| {
            let digits = space.digits(node);
            let joint = space.joint(node);
            let mut edges = Vec::new();
            let mut equilibrium = true;
            for player in 0..game.players {
                let set = &br_sets[player][space.opponent_index(&digits, player)];
                let current = joint.get(player);
                if !set.contains(current) {
                    equilibrium = false;
                }
                let na = game.num_actions(player);
                for candidate in set.iter() {
                    if &candidate == current {
                        continue;
                    }
                    let mut d = digits.clone();
                    d[player] = candidate.index(na) as usize;
                    edges.push(BrEdge { from: node, to: space.index_of_digits(&d), deviator: player });
                }
            }
            edges.sort_by_key(|e| (e.to, e.deviator));
            (edges, equilibrium)
        })
        .collect();

    let mut edges = Vec::new();
    let mut equilibria = Vec::new();
    for (node, (out, eq)) in per_node.into_iter().enumerate() {
        edges.extend(out);
        if eq {
            equilibria.push(node);
        }
    }
    let path_len = shortest_paths_to(&equilibria, &edges, space.len());
    let nodes = (0..space.len()).map(|n| space.joint(n)).collect();
    Ok(BrGraph { nodes, edges, equilibria, path_len })
}

/// Reverse breadth-first search from the target set.
fn shortest_paths_to(targets: &[usize], edges: &[BrEdge], n: usize) -> Vec<Option<usize>> {
    let mut reverse = vec![Vec::new(); n];
    for e in edges {
        reverse[e.to].push(e.from);
    }
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    for &t in targets {
        dist[t] = Some(0);
        queue.push_back(t);
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("queued nodes have a distance");
        for &u in &reverse[v] {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Nonempty equilibrium set and a finite path from every node.
pub fn is_weakly_acyclic(graph: &BrGraph) -> bool {
    !graph.equilibria.is_empty() && graph.path_len.iter().all(Option::is_some)
}

/// `L = 1 + max_π ℓ(π)`.
pub fn path_bound_l(graph: &BrGraph) -> Result<usize> {
    if !is_weakly_acyclic(graph) {
        return Err(Error::NotWeaklyAcyclic);
    }
    Ok(1 + graph.path_len.iter().flatten().copied().max().unwrap_or(0))
}

/// `∏_j min{(1 − λ^j)/|Γ^j_SD|, λ^j}^{(R+1)L}`.
pub fn p_min(game: &StochasticGame, lambdas: &[f64], r: u32, l: u32) -> Result<f64> {
    let counts =
        (0..game.players).map(|j| game.policy_count(j).map(|c| c as f64).unwrap_or(f64::INFINITY)).collect::<Vec<_>>();
    p_min_from_counts(&counts, lambdas, r, l)
}

/// [`p_min`] given the per-player policy counts `|Γ^j_SD|` directly.
pub fn p_min_from_counts(policy_counts: &[f64], lambdas: &[f64], r: u32, l: u32) -> Result<f64> {
    if lambdas.len() != policy_counts.len() {
        return Err(Error::Invalid(format!("expected {} lambdas, got {}", policy_counts.len(), lambdas.len())));
    }
    if r == 0 || l == 0 {
        return Err(Error::Invalid("R and L must be positive".into()));
    }
    let exponent = (r as i64 + 1) * l as i64;
    let mut p = 1.0;
    for (&count, &lambda) in policy_counts.iter().zip(lambdas) {
        check_range("lambda", lambda, 0.0, 1.0, true, true, "(0, 1)")?;
        let base = ((1.0 - lambda) / count).min(lambda);
        p *= match i32::try_from(exponent) {
            Ok(e) => base.powi(e),
            Err(_) => base.powf(exponent as f64),
        };
    }
    Ok(p)
}

/// Left side minus right side of the defining equation for `θ`:
/// `(1−θ)p/(θ+(1−θ)p) − θ − (1−ε)`.
pub fn theta_residual(theta: f64, p_min: f64, eps: f64) -> f64 {
    (1.0 - theta) * p_min / (theta + (1.0 - theta) * p_min) - theta - (1.0 - eps)
}

/// Returns `(θ, ξ)`.
///
/// `θ ∈ (0, 1)` is the unique root of [`theta_residual`], found by bisection
/// down to adjacent floating-point values. `ξ = min{θ, ½ min_i min{δ^i,
/// δ̄ − δ^i}} / ((R+1)·N·L)`.
pub fn theta_and_xi(
    p_min: f64,
    eps: f64,
    r: u32,
    n: u32,
    l: u32,
    deltas: &[f64],
    delta_bar: f64,
) -> Result<(f64, f64)> {
    check_range("p_min", p_min, 0.0, 1.0, true, false, "(0, 1]")?;
    check_range("eps", eps, 0.0, 1.0, true, true, "(0, 1)")?;
    if r == 0 || n == 0 || l == 0 {
        return Err(Error::Invalid("R, N and L must be positive".into()));
    }
    if deltas.is_empty() {
        return Err(Error::Invalid("at least one delta is required".into()));
    }
    for &d in deltas {
        if !(d > 0.0 && d < delta_bar) {
            return Err(Error::OutOfRange { name: "delta", value: d, expected: "(0, delta_bar)" });
        }
    }

    // residual is strictly decreasing: positive near 0, negative at 1
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if theta_residual(mid, p_min, eps) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = if theta_residual(lo, p_min, eps).abs() <= theta_residual(hi, p_min, eps).abs() { lo } else { hi };

    let margin = deltas.iter().map(|&d| d.min(delta_bar - d)).fold(f64::INFINITY, f64::min);
    let denom = (r as f64 + 1.0) * n as f64 * l as f64;
    let xi = theta.min(0.5 * margin) / denom;
    Ok((theta, xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::build_sec6_game;

    fn single_state_2x2(cost_p1: [f64; 4], cost_p2: [f64; 4]) -> StochasticGame {
        StochasticGame {
            players: 2,
            states: vec!["s".into()],
            actions: vec![vec!["a0".into(), "a1".into()]; 2],
            discounts: vec![0.5, 0.5],
            costs: vec![vec![cost_p1.to_vec()], vec![cost_p2.to_vec()]],
            kernel: vec![vec![vec![1.0]; 4]],
            initial_dist: vec![1.0],
        }
    }

    fn team_game() -> StochasticGame {
        let c = [0.0, 1.0, 1.0, 0.0];
        single_state_2x2(c, c)
    }

    #[test]
    fn team_game_graph() {
        let g = build_br_graph(&team_game(), DEFAULT_BR_TOL).unwrap();
        assert_eq!(g.nodes.len(), 4);
        // nodes in order (0,0), (0,1), (1,0), (1,1)
        assert_eq!(g.equilibria, vec![0, 3]);
        assert_eq!(g.path_len, vec![Some(0), Some(1), Some(1), Some(0)]);
        assert!(is_weakly_acyclic(&g));
        assert_eq!(path_bound_l(&g).unwrap(), 2);
        assert_eq!(g.edges.len(), 4);
        for e in &g.edges {
            let (a, b) = (&g.nodes[e.from], &g.nodes[e.to]);
            let diff: Vec<_> = (0..2).filter(|&i| a.get(i) != b.get(i)).collect();
            assert_eq!(diff, vec![e.deviator]);
        }
    }

    #[test]
    fn matching_pennies_has_no_pure_equilibrium() {
        let g = single_state_2x2([0.0, 1.0, 1.0, 0.0], [1.0, 0.0, 0.0, 1.0]);
        let graph = build_br_graph(&g, DEFAULT_BR_TOL).unwrap();
        assert!(graph.equilibria.is_empty());
        assert!(!is_weakly_acyclic(&graph));
        assert!(matches!(path_bound_l(&graph), Err(Error::NotWeaklyAcyclic)));
    }

    #[test]
    fn all_equilibria_gives_l_one() {
        let g = single_state_2x2([1.0; 4], [2.0; 4]);
        let graph = build_br_graph(&g, DEFAULT_BR_TOL).unwrap();
        assert_eq!(graph.equilibria.len(), 4);
        // every unilateral change is a tie, hence an edge
        assert_eq!(graph.edges.len(), 8);
        assert_eq!(path_bound_l(&graph).unwrap(), 1);
    }

    #[test]
    fn reference_graph_structure() {
        let graph = build_br_graph(&build_sec6_game(), DEFAULT_BR_TOL).unwrap();
        assert_eq!(graph.nodes.len(), 16);
        assert_eq!(graph.equilibria.len(), 4);
        assert!(is_weakly_acyclic(&graph));
        assert_eq!(path_bound_l(&graph).unwrap(), 2);
    }

    #[test]
    fn node_budget_is_enforced() {
        let err = build_br_graph_with_budget(&build_sec6_game(), 1e-9, 15).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { count: 16, .. }));
    }

    #[test]
    fn joint_space_round_trip() {
        let space = JointPolicySpace::new(&build_sec6_game(), 100).unwrap();
        for n in 0..space.len() {
            assert_eq!(space.index_of(&space.joint(n)), n);
        }
    }

    #[test]
    fn p_min_tabulated_examples() {
        let one = p_min_from_counts(&[2.0], &[0.2], 1, 1).unwrap();
        assert!((one - 0.04).abs() <= 1e-15 * 0.04);
        let two = p_min_from_counts(&[4.0, 4.0], &[0.2, 0.2], 3, 3).unwrap();
        let hand = 0.2_f64.powi(24);
        assert!((two - hand).abs() <= 1e-14 * hand);
        assert!(p_min_from_counts(&[2.0], &[1.0], 1, 1).is_err());
        assert!(p_min_from_counts(&[2.0], &[0.0], 1, 1).is_err());
    }

    #[test]
    fn p_min_monotone_in_lambda_on_reference_game() {
        let g = build_sec6_game();
        let hi = p_min(&g, &[0.5, 0.5], 3, 2).unwrap();
        let lo = p_min(&g, &[0.01, 0.01], 3, 2).unwrap();
        assert!(hi >= lo);
    }

    #[test]
    fn theta_closed_form_when_p_min_is_one() {
        for eps in [0.01, 0.1, 0.5, 0.9] {
            let (theta, _) = theta_and_xi(1.0, eps, 1, 1, 1, &[0.5], 2.0).unwrap();
            assert!((theta - eps / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn theta_residual_small() {
        let (theta, _) = theta_and_xi(0.04, 0.1, 3, 2, 3, &[0.5], 2.0).unwrap();
        assert!(theta > 0.0 && theta < 1.0);
        assert!(theta_residual(theta, 0.04, 0.1).abs() <= 1e-10);
    }

    #[test]
    fn xi_formula() {
        // p_min = 1 and ε = 0.2 give θ = 0.1
        let p = 1.0;
        let (theta, xi) = theta_and_xi(p, 0.2, 3, 2, 3, &[0.5], 2.0).unwrap();
        assert!((theta - 0.1).abs() < 1e-14);
        assert!((xi - 0.1 / 24.0).abs() < 1e-15);
        let (_, xi) = theta_and_xi(p, 0.9, 3, 2, 3, &[0.5], 2.0).unwrap();
        // θ = 0.45 > ½·min{0.5, 1.5} = 0.25
        assert!((xi - 0.25 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn theta_and_xi_rejects_bad_delta() {
        assert!(theta_and_xi(0.5, 0.1, 1, 1, 1, &[2.0], 2.0).is_err());
        assert!(theta_and_xi(0.5, 0.1, 1, 1, 1, &[0.0], 2.0).is_err());
        assert!(theta_and_xi(0.5, 0.1, 1, 1, 1, &[0.5], f64::INFINITY).is_ok());
        assert!(theta_and_xi(0.0, 0.1, 1, 1, 1, &[0.5], 2.0).is_err());
    }
}
