//! `drawrate`: rate games, predict fixtures, tune hyperparameters, check the
//! closed-form update against quadrature, and simulate leagues.
//!
//! Exit codes: 0 on success, 1 on bad input or I/O failure, 2 when a
//! computation degenerates numerically.

mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use args::{EngineArgs, HyperArgs, PairingArg, StateArgs};
use clap::{Parser, Subcommand};
use commands::{OptimizeArgs, RateArgs, SimulateArgs, ValidateInput};
use drawrate_core::hyperopt::SCORING_ORDER;
use drawrate_core::oracle::DEFAULT_ORDER;
use drawrate_core::{EngineConfig, Hyperparameters};

#[derive(Debug, Parser)]
#[command(name = "drawrate", version, about = "Dynamic ratings with strength-dependent draw probabilities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Update ratings with one or more periods of games
    Rate {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Games file (period,white,black,result)
        #[arg(long)]
        games: PathBuf,
        /// Where to write the next snapshot
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the per-player report (stdout if omitted)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Outcome probabilities for fixtures
    Predict {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Fixtures file (white,black)
        #[arg(long)]
        fixtures: PathBuf,
        /// Gauss-Hermite order per player
        #[arg(long, default_value_t = SCORING_ORDER)]
        order: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit hyperparameters by one-step-ahead predictive likelihood
    Optimize {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        games: PathBuf,
        /// Last period used only for filtering; later periods are scored
        #[arg(long)]
        train_until: u32,
        /// Hold alpha0 and alpha1 at their starting values (`--fix-alpha=false` fits them)
        #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
        fix_alpha: bool,
        /// Starting point alpha0,alpha1,beta0,beta1,tau (repeatable)
        #[arg(long = "start", value_parser = commands::parse_start, allow_hyphen_values = true)]
        starts: Vec<Hyperparameters>,
        #[arg(long, default_value_t = 2000)]
        max_evals: usize,
        /// Stop when the simplex objective spread falls below this
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Every objective evaluation, as delimited rows
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare closed-form single-game updates with the quadrature reference
    Validate {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Games whose players are looked up in the snapshot
        #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
        games: Option<PathBuf>,
        /// Generate this many single games instead
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
        /// Add decisive/drawn and prior-tercile rows
        #[arg(long)]
        stratify: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic league, optionally refitting its hyperparameters
    Simulate {
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = 500)]
        players: usize,
        #[arg(long, default_value_t = 12)]
        periods: u32,
        /// Games per player per period
        #[arg(long, default_value_t = 20)]
        games_per_period: usize,
        #[arg(long, value_enum, default_value_t = PairingArg::Banded)]
        pairing: PairingArg,
        /// Latent-scale pairing band for banded pairing
        #[arg(long, default_value_t = 1.0)]
        band_width: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        games_out: Option<PathBuf>,
        /// True strengths (player,period,theta)
        #[arg(long)]
        truth_out: Option<PathBuf>,
        /// Refit hyperparameters on the simulated games
        #[arg(long, requires = "train_until")]
        recover: bool,
        #[arg(long)]
        train_until: Option<u32>,
        #[arg(long, default_value_t = 2000)]
        max_evals: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Recovery report (stdout if omitted)
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Rate { state, hyper, engine, games, out, report } => commands::rate(RateArgs {
            setup: commands::load_setup(&state, &hyper, &engine)?,
            games: &games,
            out: out.as_deref(),
            report: report.as_deref(),
        }),
        Command::Predict { state, hyper, engine, fixtures, order, out } => {
            commands::predict(commands::load_setup(&state, &hyper, &engine)?, &fixtures, order, out.as_deref())
        }
        Command::Optimize { state, engine, games, train_until, fix_alpha, starts, max_evals, tol, out, trace } => {
            let no_hyper = HyperArgs { alpha0: None, alpha1: None, beta0: None, beta1: None, tau: None };
            commands::run_optimize(OptimizeArgs {
                setup: commands::load_setup(&state, &no_hyper, &engine)?,
                games: &games,
                train_until,
                starts,
                settings: commands::settings(fix_alpha, max_evals, tol),
                out: out.as_deref(),
                trace: trace.as_deref(),
            })
        }
        Command::Validate { state, hyper, engine, games, synthetic, seed, order, stratify, out } => {
            let input = match (games.as_deref(), synthetic) {
                (Some(games), _) => ValidateInput::Recorded { setup: commands::load_setup(&state, &hyper, &engine)?, games },
                (None, Some(n)) => {
                    let engine = engine.resolve(EngineConfig::default());
                    ValidateInput::Synthetic { n, seed, h: hyper.resolve(Hyperparameters::default()), engine }
                }
                (None, None) => unreachable!("clap requires one input"),
            };
            commands::validate(input, order, stratify, out.as_deref())
        }
        Command::Simulate {
            hyper,
            engine,
            players,
            periods,
            games_per_period,
            pairing,
            band_width,
            seed,
            games_out,
            truth_out,
            recover,
            train_until,
            max_evals,
            tol,
            report,
        } => commands::simulate(SimulateArgs {
            h: hyper.resolve(Hyperparameters::default()),
            engine: engine.resolve(EngineConfig::default()),
            players,
            periods,
            games_per_period,
            pairing,
            band_width,
            seed,
            games_out,
            truth_out,
            recover,
            train_until,
            settings: commands::settings(true, max_evals, tol),
            report,
        }),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let degenerate = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<drawrate_core::Error>(), Some(drawrate_core::Error::Degenerate(_))));
    if degenerate {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; help and version are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
