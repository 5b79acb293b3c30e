//! Experiment configuration, multi-trial execution, exact game analysis, and
//! the built-in two-player reference game.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acyclicity::{build_br_graph_with_budget, is_weakly_acyclic, p_min, path_bound_l, theta_and_xi, BrGraph};
use crate::agent::{AgentConfig, LearningParams};
use crate::error::{Error, Result};
use crate::game::{ActionId, DeterministicPolicy, StochasticGame};
use crate::orchestrator::{
    draw_schedule, equilibrium_frequency, Episode, EquilibriumOracle, RandomnessStreams, RecordOptions, SimulationTrace,
};
use crate::solver::{
    check_reachability, delta_bar_with_budget, perturbation_condition_holds, perturbation_gap_with_budget,
    DEFAULT_SOLVE_BUDGET,
};

/// Name under which [`build_sec6_game`] is available as a built-in.
pub const SEC6_GAME: &str = "sec6";

/// Tolerance used when testing whether a baseline joint policy is an
/// equilibrium during simulation.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

/// Two players coordinating over two states.
///
/// Both players pay 0 in `s0` when their actions match and 2 otherwise; in
/// `s1` they pay 10 when matching and 11 otherwise. From `s0` the next state
/// is uniform; from `s1` the chain returns to `s0` with probability 0.25
/// after a match and 0.9 after a mismatch. The equilibria are exactly the
/// joint policies that match in `s0` and mismatch in `s1`.
pub fn build_sec6_game() -> StochasticGame {
    let names = |p: &str, n: usize| (0..n).map(|k| format!("{p}{k}")).collect::<Vec<_>>();
    // joint index = 2·u0 + u1, so 0 and 3 are the matching profiles
    let s0 = vec![0.0, 2.0, 2.0, 0.0];
    let s1 = vec![10.0, 11.0, 11.0, 10.0];
    let costs = vec![vec![s0.clone(), s1.clone()], vec![s0, s1]];
    let from_s0 = vec![vec![0.5, 0.5]; 4];
    let from_s1 = vec![vec![0.25, 0.75], vec![0.9, 0.1], vec![0.9, 0.1], vec![0.25, 0.75]];
    StochasticGame {
        players: 2,
        states: names("s", 2),
        actions: vec![names("a", 2), names("a", 2)],
        discounts: vec![0.8, 0.8],
        costs,
        kernel: vec![from_s0, from_s1],
        initial_dist: vec![0.5, 0.5],
    }
}

/// A single-state game with no pure equilibrium.
pub fn build_matching_pennies() -> StochasticGame {
    StochasticGame {
        players: 2,
        states: vec!["s".into()],
        actions: vec![vec!["h".into(), "t".into()], vec!["h".into(), "t".into()]],
        discounts: vec![0.5, 0.5],
        // player 0 wants to match, player 1 to mismatch
        costs: vec![vec![vec![0.0, 1.0, 1.0, 0.0]], vec![vec![1.0, 0.0, 0.0, 1.0]]],
        kernel: vec![vec![vec![1.0]; 4]],
        initial_dist: vec![1.0],
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &[SEC6_GAME, "matching-pennies"]
}

pub fn builtin_game(name: &str) -> Option<StochasticGame> {
    match name {
        SEC6_GAME => Some(build_sec6_game()),
        "matching-pennies" => Some(build_matching_pennies()),
        _ => None,
    }
}

/// The learning parameters used for the reference reproduction.
pub fn sec6_params() -> LearningParams {
    LearningParams { rho: 0.05, lambda: 0.2, delta: 0.5, alpha: 0.08 }
}

/// Default record times.
pub const DEFAULT_RECORD_TIMES: [u64; 5] = [0, 10_000, 20_000, 30_000, 40_000];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameSource {
    Builtin(String),
    Path(PathBuf),
}

impl GameSource {
    /// A built-in name, or else a path to a JSON game file.
    pub fn parse(s: &str) -> Self {
        if builtin_game(s).is_some() {
            GameSource::Builtin(s.to_owned())
        } else {
            GameSource::Path(PathBuf::from(s))
        }
    }

    pub fn load(&self) -> Result<StochasticGame> {
        match self {
            GameSource::Builtin(name) => {
                builtin_game(name).ok_or_else(|| Error::Invalid(format!("unknown built-in game {name:?}")))
            }
            GameSource::Path(p) => StochasticGame::load(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPolicies {
    /// Uniform over deterministic policies, drawn per trial.
    Random,
    /// The same initial action per state for every trial, one list per player.
    Explicit(Vec<Vec<ActionId>>),
}

fn default_game() -> GameSource {
    GameSource::Builtin(SEC6_GAME.into())
}
fn default_params() -> Vec<LearningParams> {
    vec![sec6_params()]
}
fn default_t_min() -> u64 {
    5000
}
fn default_ratio() -> u64 {
    3
}
fn default_horizon() -> u64 {
    100_000
}
fn default_trials() -> u64 {
    500
}
fn default_record_times() -> Vec<u64> {
    DEFAULT_RECORD_TIMES.to_vec()
}
fn default_initial() -> InitialPolicies {
    InitialPolicies::Random
}

/// Every input of a multi-trial run. Missing fields take the reference
/// defaults, so `{}` describes the full reference reproduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_game")]
    pub game: GameSource,
    /// One entry per player, or a single entry shared by all players.
    #[serde(default = "default_params")]
    pub params: Vec<LearningParams>,
    /// Minimum phase length `T`.
    #[serde(default = "default_t_min")]
    pub t_min: u64,
    /// Phase length ratio `R`; lengths are uniform on `[T, R·T]`.
    #[serde(default = "default_ratio")]
    pub ratio: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_record_times")]
    pub record_times: Vec<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_initial")]
    pub initial_policies: InitialPolicies,
    /// Keep Q-table snapshots at each record time in exported traces.
    #[serde(default)]
    pub record_q: bool,
    /// Write every trial's trace to `traces.json`.
    #[serde(default)]
    pub export_traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            game: default_game(),
            params: default_params(),
            t_min: default_t_min(),
            ratio: default_ratio(),
            horizon: default_horizon(),
            trials: default_trials(),
            record_times: default_record_times(),
            seed: 0,
            initial_policies: default_initial(),
            record_q: false,
            export_traces: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-player parameters for `game`.
    pub fn player_params(&self, game: &StochasticGame) -> Result<Vec<LearningParams>> {
        let ps = match self.params.len() {
            1 => vec![self.params[0]; game.players],
            n if n == game.players => self.params.clone(),
            n => return Err(Error::Invalid(format!("{n} parameter sets for a {}-player game", game.players))),
        };
        for p in &ps {
            p.validate()?;
        }
        Ok(ps)
    }

    pub fn validate(&self, game: &StochasticGame) -> Result<()> {
        game.ensure_valid()?;
        self.player_params(game)?;
        if self.t_min == 0 || self.ratio == 0 {
            return Err(Error::Invalid("t_min and ratio must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Invalid("horizon must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Invalid("trials must be positive".into()));
        }
        if let InitialPolicies::Explicit(choices) = &self.initial_policies {
            if choices.len() != game.players {
                return Err(Error::Invalid("one initial policy per player is required".into()));
            }
            for (i, c) in choices.iter().enumerate() {
                DeterministicPolicy::new(i, c.clone()).check(game)?;
            }
        }
        Ok(())
    }

    /// Record times within the horizon, sorted and deduplicated.
    pub fn effective_record_times(&self) -> Vec<u64> {
        let mut ts: Vec<u64> = self.record_times.iter().copied().filter(|&t| t <= self.horizon).collect();
        ts.sort_unstable();
        ts.dedup();
        ts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub time: u64,
    pub frequency: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub frequencies: Vec<FrequencyRow>,
    /// Record times dropped because they lie beyond the horizon.
    pub dropped_record_times: Vec<u64>,
    pub equilibria: usize,
    pub joint_policies: usize,
    pub reachable: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub summary: ExperimentSummary,
    pub traces: Vec<SimulationTrace>,
}

/// Runs all trials of `config` on `game` with `workers` threads (0 picks the
/// number of CPUs). Results do not depend on `workers`.
pub fn run_experiment(config: &ExperimentConfig, game: &StochasticGame, workers: usize) -> Result<ExperimentResult> {
    use rayon::prelude::*;

    config.validate(game)?;
    let params = config.player_params(game)?;
    let times = config.effective_record_times();
    let dropped: Vec<u64> = config.record_times.iter().copied().filter(|&t| t > config.horizon).collect();
    let record = RecordOptions { times: times.clone(), q_snapshots: config.record_q };
    let root = RandomnessStreams::new(config.seed);
    let oracle = EquilibriumOracle::new(game, EQUILIBRIUM_TOL);

    let trial = |k: u64| -> Result<SimulationTrace> {
        let streams = root.for_trial(k);
        let schedule = draw_schedule(&streams, game.players, config.t_min, config.ratio, config.horizon)?;
        let configs: Vec<AgentConfig> = (0..game.players)
            .map(|i| {
                let policy = match &config.initial_policies {
                    InitialPolicies::Random => streams.initial_policy(game, i),
                    InitialPolicies::Explicit(c) => DeterministicPolicy::new(i, c[i].clone()),
                };
                AgentConfig::new(game, params[i], policy)
            })
            .collect();
        let mut trace = Episode { game, configs: &configs, schedule: &schedule, streams, horizon: config.horizon }
            .run(&record, &oracle)?;
        if !config.export_traces {
            // only the equilibrium flags are needed downstream
            trace.final_q.clear();
        }
        Ok(trace)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let traces = pool.install(|| (0..config.trials).into_par_iter().map(trial).collect::<Result<Vec<_>>>())?;

    let frequencies = if times.is_empty() {
        Vec::new()
    } else {
        equilibrium_frequency(&traces, &times)?
            .into_iter()
            .map(|(time, frequency)| FrequencyRow { time, frequency, trials: config.trials })
            .collect()
    };

    let graph_equilibria = count_equilibria(game, &oracle)?;
    let reachable = check_reachability(game);
    let mut notes = Vec::new();
    if matches!(config.initial_policies, InitialPolicies::Random) {
        notes.push(
            "initial baseline policies are uniform over deterministic policies, so the expected \
             frequency at t = 0 is the fraction of joint policies that are equilibria"
                .to_owned(),
        );
    }
    if !reachable {
        notes.push("some state is not reachable from every other state under every joint action".to_owned());
    }
    if !dropped.is_empty() {
        notes.push("record times beyond the horizon were dropped".to_owned());
    }
    let summary = ExperimentSummary {
        config: config.clone(),
        frequencies,
        dropped_record_times: dropped,
        equilibria: graph_equilibria.0,
        joint_policies: graph_equilibria.1,
        reachable,
        notes,
    };
    Ok(ExperimentResult { summary, traces })
}

/// Equilibrium count and joint policy count, or zeros if the joint policy
/// space is too large to enumerate.
fn count_equilibria(game: &StochasticGame, oracle: &EquilibriumOracle<'_>) -> Result<(usize, usize)> {
    let space = match crate::acyclicity::JointPolicySpace::new(game, 1 << 16) {
        Ok(s) => s,
        Err(Error::BudgetExceeded { .. }) => return Ok((0, 0)),
        Err(e) => return Err(e),
    };
    let mut eq = 0;
    for k in 0..space.len() {
        if oracle.is_equilibrium(&space.joint(k))? {
            eq += 1;
        }
    }
    Ok((eq, space.len()))
}

impl ExperimentResult {
    pub fn frequencies_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.summary.frequencies {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }

    pub fn traces_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.traces)?)
    }

    /// Writes `frequencies.csv`, `summary.json` and, if requested,
    /// `traces.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![
            (dir.join("frequencies.csv"), self.frequencies_csv()?),
            (dir.join("summary.json"), self.summary_json()?),
        ];
        if self.summary.config.export_traces {
            files.push((dir.join("traces.json"), self.traces_json()?));
        }
        for (path, body) in &files {
            fs::write(path, body).map_err(|e| Error::io(path, e))?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

/// Optional inputs to [`analyze_game`]. Per-player values may be given once
/// for all players.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub rho: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub r: Option<u32>,
    pub epsilon: Option<f64>,
    pub tol: f64,
    pub budget: u128,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            rho: None,
            delta: None,
            lambda: None,
            r: None,
            epsilon: None,
            tol: crate::acyclicity::DEFAULT_BR_TOL,
            budget: DEFAULT_SOLVE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedJoint {
    pub index: usize,
    /// Action names per player per state.
    pub policies: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub rho: Vec<f64>,
    pub gap: f64,
    /// Whether the gap is small relative to `δ` and `δ̄` (needs `delta`).
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub delta: Vec<f64>,
    /// `0 < δ^i < δ̄` for every player.
    pub within_delta_bar: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub p_min: f64,
    pub theta: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub players: usize,
    pub states: usize,
    pub action_counts: Vec<usize>,
    pub joint_policies: usize,
    /// Minimum nonzero best-response gap; `null` when no gap exists.
    pub delta_bar: Option<f64>,
    pub equilibria: Vec<NamedJoint>,
    pub weakly_acyclic: bool,
    /// Longest shortest strict best-response path to an equilibrium, plus one.
    pub path_bound: Option<usize>,
    pub reachable: bool,
    pub delta: Option<DeltaReport>,
    pub perturbation: Option<PerturbationReport>,
    pub bounds: Option<BoundsReport>,
    pub notes: Vec<String>,
}

impl AnalysisReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn per_player(name: &str, v: &Option<Vec<f64>>, n: usize) -> Result<Option<Vec<f64>>> {
    match v {
        None => Ok(None),
        Some(v) if v.len() == 1 => Ok(Some(vec![v[0]; n])),
        Some(v) if v.len() == n => Ok(Some(v.clone())),
        Some(v) => Err(Error::Invalid(format!("{} values of {name} for {n} players", v.len()))),
    }
}

/// Exact analysis of a game: equilibria, `δ̄`, weak acyclicity, path bound,
/// reachability and, when the parameters are supplied, the perturbation
/// condition and the probability bounds.
pub fn analyze_game(game: &StochasticGame, params: &AnalysisParams) -> Result<(AnalysisReport, BrGraph)> {
    game.ensure_valid()?;
    let n = game.players;
    let rho = per_player("rho", &params.rho, n)?;
    let delta = per_player("delta", &params.delta, n)?;
    let lambda = per_player("lambda", &params.lambda, n)?;

    let graph = build_br_graph_with_budget(game, params.tol, params.budget)?;
    let db = delta_bar_with_budget(game, params.tol, params.budget)?;
    let weakly_acyclic = is_weakly_acyclic(&graph);
    let path_bound = if weakly_acyclic { Some(path_bound_l(&graph)?) } else { None };
    let reachable = check_reachability(game);

    let equilibria = graph
        .equilibria
        .iter()
        .map(|&k| {
            let policies = graph.nodes[k]
                .policies
                .iter()
                .map(|p| p.choice.iter().map(|&a| game.actions[p.player][a].clone()).collect())
                .collect();
            NamedJoint { index: k, policies }
        })
        .collect();

    let mut notes = Vec::new();
    if !reachable {
        notes.push("some state is not reachable from every other state under every joint action".to_owned());
    }

    let delta_report = delta
        .as_ref()
        .map(|d| DeltaReport { delta: d.clone(), within_delta_bar: d.iter().all(|&x| x > 0.0 && x < db) });

    let perturbation = match &rho {
        Some(r) => {
            let gap = perturbation_gap_with_budget(game, r, params.budget)?;
            let holds = delta.as_ref().map(|d| perturbation_condition_holds(gap, d, db));
            Some(PerturbationReport { rho: r.clone(), gap, holds })
        }
        None => None,
    };

    let bounds = match (&lambda, params.r, params.epsilon, &delta, path_bound) {
        (Some(lam), Some(r), Some(eps), Some(d), Some(l)) => {
            let l = u32::try_from(l).map_err(|_| Error::Invalid("path bound too large".into()))?;
            let p = p_min(game, lam, r, l)?;
            let (theta, xi) = theta_and_xi(p, eps, r, n as u32, l, d, db)?;
            Some(BoundsReport { p_min: p, theta, xi })
        }
        (Some(_), Some(_), Some(_), Some(_), None) => {
            notes.push("probability bounds need a weakly acyclic game".to_owned());
            None
        }
        _ => None,
    };

    let report = AnalysisReport {
        players: n,
        states: game.num_states(),
        action_counts: game.action_counts(),
        joint_policies: graph.nodes.len(),
        delta_bar: db.is_finite().then_some(db),
        equilibria,
        weakly_acyclic,
        path_bound,
        reachable,
        delta: delta_report,
        perturbation,
        bounds,
        notes,
    };
    Ok((report, graph))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_game_is_valid() {
        let g = build_sec6_game();
        assert!(g.validate().is_empty());
        assert_eq!(g.kernel_row(1, g.joint_index(&[1, 1])), &[0.25, 0.75]);
        assert_eq!(g.kernel_row(1, g.joint_index(&[0, 1])), &[0.9, 0.1]);
        assert_eq!(g.cost(1, 1, g.joint_index(&[1, 0])), 11.0);
    }

    #[test]
    fn reference_analysis() {
        let params = AnalysisParams {
            rho: Some(vec![0.05]),
            delta: Some(vec![0.5]),
            lambda: Some(vec![0.2]),
            r: Some(3),
            epsilon: Some(0.1),
            ..AnalysisParams::default()
        };
        let (report, graph) = analyze_game(&build_sec6_game(), &params).unwrap();
        assert_eq!(report.equilibria.len(), 4);
        assert!(report.weakly_acyclic);
        assert_eq!(report.path_bound, Some(2));
        assert!((report.delta_bar.unwrap() - 2.0).abs() < 1e-6);
        assert!(report.reachable);
        assert_eq!(graph.nodes.len(), 16);
        for eq in &report.equilibria {
            assert_eq!(eq.policies[0][0], eq.policies[1][0]);
            assert_ne!(eq.policies[0][1], eq.policies[1][1]);
        }
        let pert = report.perturbation.unwrap();
        assert!((pert.gap - 0.32651).abs() < 1e-4, "{}", pert.gap);
        assert_eq!(pert.holds, Some(false));
        let b = report.bounds.unwrap();
        assert!(b.p_min > 0.0 && b.theta > 0.0 && b.xi > 0.0);
    }

    #[test]
    fn matching_pennies_analysis() {
        let (report, _) = analyze_game(&build_matching_pennies(), &AnalysisParams::default()).unwrap();
        assert!(report.equilibria.is_empty());
        assert!(!report.weakly_acyclic);
        assert_eq!(report.path_bound, None);
    }

    #[test]
    fn single_player_mdp_is_weakly_acyclic() {
        let g = StochasticGame {
            players: 1,
            states: vec!["x".into(), "y".into()],
            actions: vec![vec!["stay".into(), "go".into()]],
            discounts: vec![0.9],
            costs: vec![vec![vec![1.0, 0.0], vec![0.0, 2.0]]],
            kernel: vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
            initial_dist: vec![1.0, 0.0],
        };
        let (report, _) = analyze_game(&g, &AnalysisParams::default()).unwrap();
        assert!(report.weakly_acyclic);
        assert_eq!(report.equilibria.len(), 1);
        assert!(report.path_bound.unwrap() <= 2);
    }

    #[test]
    fn empty_config_means_reference_defaults() {
        let c = ExperimentConfig::from_json_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let back = ExperimentConfig::from_json_str(&c.to_json_string().unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(ExperimentConfig::from_json_str(r#"{"horizn": 3}"#).is_err());
    }

    #[test]
    fn config_validation() {
        let g = build_sec6_game();
        let ok = ExperimentConfig { horizon: 10, trials: 1, ..Default::default() };
        assert!(ok.validate(&g).is_ok());
        assert!(ExperimentConfig { trials: 0, ..ok.clone() }.validate(&g).is_err());
        assert!(ExperimentConfig { ratio: 0, ..ok.clone() }.validate(&g).is_err());
        assert!(ExperimentConfig { params: vec![sec6_params(); 3], ..ok.clone() }.validate(&g).is_err());
        let bad = InitialPolicies::Explicit(vec![vec![0, 2], vec![0, 0]]);
        assert!(ExperimentConfig { initial_policies: bad, ..ok }.validate(&g).is_err());
    }

    #[test]
    fn tiny_experiment_has_binary_frequencies() {
        let g = build_sec6_game();
        let c = ExperimentConfig { horizon: 10, trials: 1, record_times: vec![0, 5, 10, 40_000], ..Default::default() };
        let r = run_experiment(&c, &g, 1).unwrap();
        let f = &r.summary.frequencies;
        assert_eq!(f.iter().map(|r| r.time).collect::<Vec<_>>(), vec![0, 5, 10]);
        assert!(f.iter().all(|r| r.frequency == 0.0 || r.frequency == 1.0));
        assert_eq!(r.summary.dropped_record_times, vec![40_000]);
        assert_eq!(r.summary.equilibria, 4);
        let csv = r.frequencies_csv().unwrap();
        assert!(csv.starts_with("time,frequency,trials\n"));
    }

    #[test]
    fn game_source_parsing() {
        assert_eq!(GameSource::parse("sec6"), GameSource::Builtin("sec6".into()));
        assert_eq!(GameSource::parse("g.json"), GameSource::Path("g.json".into()));
        assert!(GameSource::Path("/nonexistent/g.json".into()).load().is_err());
    }
}
