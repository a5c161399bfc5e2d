//! Command-line front end for the `stopgame` solvers.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 on numerical failure
//! (non-convergent value iteration, or an equilibrium check whose gap
//! exceeds the tolerance).

pub mod config;
pub mod report;

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stopgame::disorder::{self, DisorderError, GridPolicy, PosteriorState};
use stopgame::dynkin;
use stopgame::sensor_net::{self, NetError, NetSpec};
use stopgame::voting_game::{self, GameError, Horizon};

use config::{Config, ConfigError, HorizonValue};
use report::{DetectReport, DynkinReport, GameReport, PolicyRow, Table, VerifyReport, VerifyRow};

#[derive(Debug, Parser)]
#[command(name = "stopgame", version, about = "Multilateral stopping games on Markov chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a voting stopping game by backward induction, or by value
    /// iteration with `--horizon inf`.
    SolveGame(CommonArgs),
    /// Solve a finite game and report every player's best unilateral deviation gain.
    Verify(CommonArgs),
    /// Solve a two-player zero-sum Dynkin game on the `[chain]`.
    SolveDynkin(CommonArgs),
    /// Solve the discretized disorder detection problem and evaluate it by simulation.
    Detect(CommonArgs),
    /// Solve a sensor network fused by a simple game and replay it by simulation.
    SimulateNet(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed for Monte Carlo runs (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Convergence tolerance for value iteration, or the maximal accepted
    /// deviation gain for `verify`.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Horizon override: a step count, or `inf` for `solve-game`.
    #[arg(long, value_parser = HorizonValue::parse)]
    pub horizon: Option<HorizonValue>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error("value iteration did not converge in {iterations} iterations")]
    NotConverged { iterations: usize, residual_history: Vec<f64> },
    #[error("deviation gain {gap:e} exceeds tolerance {tol:e}")]
    GapExceeded { gap: f64, tol: f64 },
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::NotConverged { .. } | Self::GapExceeded { .. } => 2,
            _ => 1,
        }
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        match e {
            GameError::NotConverged {
                iterations,
                residual_history,
            } => Self::NotConverged {
                iterations,
                residual_history,
            },
            other => Self::Invalid(other.to_string()),
        }
    }
}

impl From<DisorderError> for CliError {
    fn from(e: DisorderError) -> Self {
        match e {
            DisorderError::Game(g) => g.into(),
            other => Self::Invalid(format!("disorder: {other}")),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Game(g) => g.into(),
            NetError::Disorder(d) => d.into(),
            other => Self::Invalid(format!("net: {other}")),
        }
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::NotConverged { residual_history, .. } = &e {
                eprintln!("residual history (sup-norm change per iteration):");
                for (k, r) in residual_history.iter().enumerate() {
                    eprintln!("{}\t{r}", k + 1);
                }
            }
            e.exit_code()
        }
    }
}

fn execute(command: &Command) -> Result<(), CliError> {
    let (args, output) = match command {
        Command::SolveGame(a) => (a, solve_game(a)?),
        Command::Verify(a) => {
            let (report, gap_error) = verify(a)?;
            emit(a, &report)?;
            return gap_error.map_or(Ok(()), Err);
        }
        Command::SolveDynkin(a) => (a, solve_dynkin(a)?),
        Command::Detect(a) => (a, detect(a)?),
        Command::SimulateNet(a) => (a, simulate_net(a)?),
    };
    emit(args, output.as_ref())
}

fn emit(args: &CommonArgs, report: &dyn Table) -> Result<(), CliError> {
    let text = match args.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    }
    .map_err(CliError::Io)?;
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn load(args: &CommonArgs) -> Result<Config, CliError> {
    let text =
        fs::read_to_string(&args.config).map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    Ok(config::parse(&text)?)
}

fn finite_override(args: &CommonArgs) -> Result<Option<usize>, CliError> {
    match args.horizon {
        None => Ok(None),
        Some(HorizonValue::Finite(n)) => Ok(Some(n)),
        Some(HorizonValue::Infinite) => Err(CliError::Invalid("--horizon: this command needs a finite horizon".into())),
    }
}

fn solve_game(args: &CommonArgs) -> Result<Box<dyn Table>, CliError> {
    let cfg = load(args)?;
    let (spec, x0) = cfg.game_spec(args.horizon)?;
    match spec.horizon {
        Horizon::Finite(_) => {
            let sol = voting_game::solve_finite(&spec)?;
            Ok(Box::new(GameReport::finite(&spec, &sol, x0)))
        }
        Horizon::Infinite => {
            let tol = args.tol.or(cfg.solver.tol).unwrap_or(config::DEFAULT_TOL);
            let sol = voting_game::solve_infinite(&spec, tol, cfg.solver.max_iter)?;
            Ok(Box::new(GameReport::infinite(&spec, &sol, x0)))
        }
    }
}

fn verify(args: &CommonArgs) -> Result<(VerifyReport, Option<CliError>), CliError> {
    let cfg = load(args)?;
    let (spec, x0) = cfg.game_spec(args.horizon)?;
    if spec.horizon == Horizon::Infinite {
        return Err(CliError::Invalid("verify: needs a finite horizon".into()));
    }
    let tol = args.tol.or(cfg.solver.tol).unwrap_or(config::DEFAULT_GAP_TOL);
    let sol = voting_game::solve_finite(&spec)?;
    let labels = spec.chain.labels();
    let mut rows = Vec::new();
    let mut max_gap = f64::NEG_INFINITY;
    for state in 0..spec.states() {
        let gap = voting_game::deviation_gap(&spec, &sol.profile, state)?;
        max_gap = max_gap.max(gap.max_gap());
        for player in 0..spec.players() {
            rows.push(VerifyRow {
                state: labels[state].clone(),
                player: player + 1,
                payoff: gap.payoff[player],
                best_response: gap.best_response[player],
                gap: gap.gap[player],
            });
        }
    }
    let report = VerifyReport {
        initial_state: labels[x0].clone(),
        tol,
        max_gap,
        rows,
    };
    let failure = (max_gap > tol).then_some(CliError::GapExceeded { gap: max_gap, tol });
    Ok((report, failure))
}

fn solve_dynkin(args: &CommonArgs) -> Result<Box<dyn Table>, CliError> {
    let cfg = load(args)?;
    let (chain, triple, horizon) = cfg.dynkin(finite_override(args)?)?;
    let sol = dynkin::solve_finite_dynkin(&chain, &triple, horizon).map_err(|e| CliError::Invalid(format!("dynkin: {e}")))?;
    let check = dynkin::check_neveu(&triple);
    Ok(Box::new(DynkinReport::new(&chain, &check, &sol)))
}

fn detect(args: &CommonArgs) -> Result<Box<dyn Table>, CliError> {
    let cfg = load(args)?;
    let (section, model) = cfg.disorder()?;
    let horizon = finite_override(args)?
        .or(section.horizon)
        .ok_or_else(|| ConfigError::new("disorder.horizon", "missing; set it in the config or pass --horizon"))?;
    let seed = args.seed.or(section.seed).unwrap_or(0);
    let (det, _, sol) = disorder::solve_detection(&model, section.grid, horizon)?;
    let dp_value = sol.values[0][horizon][det.initial];
    let mut rows = vec![PolicyRow {
        policy: "dp".into(),
        reps: 0,
        estimate: dp_value,
        stderr: 0.0,
    }];
    if section.mc_reps > 0 {
        let policy = GridPolicy {
            chain: &det,
            profile: &sol.profile,
            player: 0,
        };
        let est = disorder::evaluate_policy_mc(&model, &policy, horizon, section.mc_reps, seed)?;
        rows.push(PolicyRow::from_estimate("dp-policy", &est));
        for &t in &section.thresholds {
            let rule = move |_: usize, s: &PosteriorState| s.changed >= t;
            let est = disorder::evaluate_policy_mc(&model, &rule, horizon, section.mc_reps, seed)?;
            rows.push(PolicyRow::from_estimate(&format!("threshold-{t}"), &est));
        }
    }
    Ok(Box::new(DetectReport {
        grid_size: section.grid,
        chain_states: det.len(),
        horizon,
        seed,
        rows,
    }))
}

fn simulate_net(args: &CommonArgs) -> Result<Box<dyn Table>, CliError> {
    let cfg = load(args)?;
    let (section, sensors, fusion) = cfg.net()?;
    let horizon = finite_override(args)?
        .or(section.horizon)
        .ok_or_else(|| ConfigError::new("net.horizon", "missing; set it in the config or pass --horizon"))?;
    let seed = args.seed.or(section.seed).unwrap_or(0);
    let spec = NetSpec {
        sensors,
        fusion,
        grid_size: section.grid,
        horizon,
    };
    let (report, _, _) = sensor_net::run_pipeline(&spec, section.mc_reps, seed)?;
    Ok(Box::new(report))
}
