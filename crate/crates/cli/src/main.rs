use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adql_core::experiment::{builtin_game, builtin_names, AnalysisParams, GameSource};
use adql_core::{analyze_game, run_experiment, Error, ExperimentConfig, StochasticGame};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adql", version, about = "Asynchronous decentralized Q-learning in stochastic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact analysis: equilibria, best-response graph, gaps and bounds.
    Analyze {
        /// Game JSON file or built-in name.
        game: String,
        /// Experimentation probability, one value or one per player.
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
        /// Suboptimality tolerance, one value or one per player.
        #[arg(long, value_delimiter = ',')]
        delta: Option<Vec<f64>>,
        /// Inertia, one value or one per player.
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
        /// Phase length ratio R.
        #[arg(long)]
        r: Option<u32>,
        /// Target failure probability for the probability bounds.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = adql_core::acyclicity::DEFAULT_BR_TOL)]
        tol: f64,
        /// Maximum number of joint policies or exact solves.
        #[arg(long, default_value_t = adql_core::solver::DEFAULT_SOLVE_BUDGET)]
        budget: u128,
        /// Write the best-response graph as JSON.
        #[arg(long)]
        graph_out: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a multi-trial experiment described by a config file.
    Simulate {
        /// Game JSON file or built-in name; overrides the config's game.
        game: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        /// Worker threads; 0 uses every CPU. Output does not depend on it.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reproduce the equilibrium-frequency table on the built-in game.
    #[command(name = "reproduce-sec6")]
    ReproduceSec6 {
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = 100_000)]
        horizon: u64,
        /// Use a horizon of 10^6 stage games.
        #[arg(long, conflicts_with = "horizon")]
        full: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also write every trial's trace.
        #[arg(long)]
        export_traces: bool,
    },
    /// Check a game file and list every violated invariant.
    Validate { game: PathBuf },
    /// Print a built-in game as JSON.
    ShowGame {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(builtin_names()))]
        name: String,
    },
}

fn load_game(source: &str) -> Result<StochasticGame, Error> {
    GameSource::parse(source).load()
}

fn write_or_print(out: Option<&Path>, body: &str) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, body).map_err(|e| Error::Invalid(format!("{}: {e}", p.display()))),
        None => {
            println!("{body}");
            Ok(())
        }
    }
}

fn experiment(config: &ExperimentConfig, game: &StochasticGame, out_dir: &Path, workers: usize) -> Result<(), Error> {
    let result = run_experiment(config, game, workers)?;
    let files = result.write_to(out_dir)?;
    print!("{}", result.frequencies_csv()?);
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Analyze { game, rho, delta, lambda, r, epsilon, tol, budget, graph_out, out } => {
            let game = load_game(&game)?;
            let params = AnalysisParams { rho, delta, lambda, r, epsilon, tol, budget };
            let (report, graph) = analyze_game(&game, &params)?;
            if let Some(path) = graph_out {
                write_or_print(Some(&path), &graph.to_json_string()?)?;
            }
            write_or_print(out.as_deref(), &report.to_json_string()?)
        }
        Command::Simulate { game, config, out_dir, workers, seed } => {
            let mut config = ExperimentConfig::load(&config)?;
            config.game = GameSource::parse(&game);
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let game = config.game.load()?;
            experiment(&config, &game, &out_dir, workers)
        }
        Command::ReproduceSec6 { trials, horizon, full, seed, out_dir, workers, export_traces } => {
            let config = ExperimentConfig {
                trials,
                horizon: if full { 1_000_000 } else { horizon },
                seed,
                export_traces,
                ..Default::default()
            };
            let game = config.game.load()?;
            experiment(&config, &game, &out_dir, workers)
        }
        Command::Validate { game } => {
            StochasticGame::load(&game)?;
            println!("{}: ok", game.display());
            Ok(())
        }
        Command::ShowGame { name } => {
            let game = builtin_game(&name).expect("name restricted by clap");
            println!("{}", game.to_json_string()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::InvalidGame(violations)) => {
            eprintln!("error: invalid game");
            for v in violations {
                eprintln!("  {v}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
