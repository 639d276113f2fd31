use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use drawrate_core::hyperopt::{
    default_starts, optimize, predictive_distribution, OptimizationResult, OptimizerSettings, PeriodData,
};
use drawrate_core::model::{latent_sd_to_elo, latent_to_elo};
use drawrate_core::optim::NelderMeadSettings;
use drawrate_core::oracle::{compare_updates, QuadratureRule, SingleGame};
use drawrate_core::simulate::{recovery_experiment, simulate_league, synthetic_single_games, LeagueConfig, Pairing};
use drawrate_core::store::{self, RatingSnapshot, RowReject};
use drawrate_core::update::{run_period, PeriodUpdate};
use drawrate_core::{Color, EngineConfig, GameRecord, Hyperparameters, RatingState};

use crate::args::{EngineArgs, HyperArgs, PairingArg, StateArgs};

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

fn warn_rejects(path: &Path, rejects: &[RowReject]) {
    for r in rejects {
        eprintln!("warning: {}:{}: {}", path.display(), r.line, r.reason);
    }
}

/// Writes to `path` atomically, or to stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => store::write_atomic(p, text.as_bytes()).with_context(|| format!("cannot write {}", p.display())),
        None => {
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read_games(path: &Path) -> Result<Vec<GameRecord>> {
    let (games, rejects) = store::parse_games(open(path)?)?;
    warn_rejects(path, &rejects);
    Ok(games)
}

/// Starting state with the hyperparameters and engine settings that apply to it.
pub struct Setup {
    pub state: RatingState,
    pub h: Hyperparameters,
    pub engine: EngineConfig,
}

pub fn load_setup(state: &StateArgs, hyper: &HyperArgs, engine: &EngineArgs) -> Result<Setup> {
    if let Some(path) = &state.snapshot {
        let snap = store::load_snapshot_file(path).with_context(|| format!("cannot load {}", path.display()))?;
        let engine = engine.resolve(snap.config);
        engine.validate()?;
        return Ok(Setup { state: snap.state, h: hyper.resolve(snap.hyperparameters), engine });
    }
    let engine = engine.resolve(EngineConfig::default());
    engine.validate()?;
    let h = hyper.resolve(Hyperparameters::default());
    let state = match &state.ratings {
        Some(path) => {
            let (ratings, rejects) = store::parse_ratings(open(path)?)?;
            warn_rejects(path, &rejects);
            store::initialize_priors(&ratings, state.period, &engine)?
        }
        None => RatingState::new(state.period),
    };
    Ok(Setup { state, h, engine })
}

/// Elo with one decimal; never prints "-0.0".
fn elo(x: f64) -> String {
    let s = format!("{x:.1}");
    if s == "-0.0" {
        "0.0".to_owned()
    } else {
        s
    }
}

fn report_row(out: &mut String, period: u32, u: &PeriodUpdate) {
    let (prior, post) = (latent_to_elo(u.prior.mu), latent_to_elo(u.posterior.mu));
    let (prior_rd, post_rd) = (latent_sd_to_elo(u.prior.sigma), latent_sd_to_elo(u.posterior.sigma));
    let _ = writeln!(
        out,
        "{period},{},{},{},{},{},{},{},{:.6},{:.6}",
        u.player,
        u.games,
        elo(prior),
        elo(post),
        elo(post - prior),
        elo(prior_rd),
        elo(post_rd),
        u.posterior.mu,
        u.posterior.sigma
    );
}

pub struct RateArgs<'a> {
    pub setup: Setup,
    pub games: &'a Path,
    pub out: Option<&'a Path>,
    pub report: Option<&'a Path>,
}

pub fn rate(a: RateArgs) -> Result<()> {
    let Setup { mut state, h, engine } = a.setup;
    let games = read_games(a.games)?;
    let first = state.period;
    let mut keep = Vec::with_capacity(games.len());
    for g in games {
        if g.period < first {
            eprintln!("warning: skipping game from period {} (state is at period {first})", g.period);
        } else {
            keep.push(g);
        }
    }
    let last = keep.iter().map(|g| g.period).max().unwrap_or(first).max(first);
    let data = PeriodData::with_span(keep, first, last)?;

    let mut report =
        String::from("period,player,games,prior_elo,posterior_elo,elo_change,prior_rd,posterior_rd,mu,sigma\n");
    for t in first..=last {
        let result = run_period(&state, data.games(t), &h, &engine)?;
        for r in &result.rejects {
            eprintln!("warning: period {t}: game {} skipped: {}", r.index + 1, r.reason);
        }
        for u in result.updates.iter().filter(|u| u.games > 0) {
            report_row(&mut report, t, u);
        }
        state = result.state;
    }

    let snapshot = RatingSnapshot { state, hyperparameters: h, config: engine };
    if let Some(path) = a.out {
        store::save_snapshot_file(&snapshot, path).with_context(|| format!("cannot write {}", path.display()))?;
    }
    emit(a.report, &report)
}

pub fn predict(setup: Setup, fixtures: &Path, order: usize, out: Option<&Path>) -> Result<()> {
    let (fixtures_list, rejects) = store::parse_fixtures(open(fixtures)?)?;
    warn_rejects(fixtures, &rejects);
    let rule = QuadratureRule::gauss_hermite(order)?;
    let mut text = String::from("white,black,p_win,p_draw,p_loss,p_win_decisive\n");
    for f in &fixtures_list {
        for id in [&f.white, &f.black] {
            if !setup.state.players.contains_key(id) {
                eprintln!("warning: {id} is not in the snapshot; using the default prior");
            }
        }
        let w = setup.state.belief_or_default(&f.white, &setup.engine);
        let b = setup.state.belief_or_default(&f.black, &setup.engine);
        let d = predictive_distribution(&w, &b, &setup.h, &rule)?;
        let _ = writeln!(
            text,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            f.white,
            f.black,
            d.win,
            d.draw,
            d.loss,
            d.decisive_win_probability()
        );
    }
    emit(out, &text)
}

/// Parses `alpha0,alpha1,beta0,beta1,tau`.
pub fn parse_start(s: &str) -> Result<Hyperparameters, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad number {x:?}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [alpha0, alpha1, beta0, beta1, tau] => Ok(Hyperparameters { alpha0, alpha1, beta0, beta1, tau }),
        _ => Err("expected five comma-separated values: alpha0,alpha1,beta0,beta1,tau".to_owned()),
    }
}

fn optimization_table(r: &OptimizationResult) -> String {
    let mut out = String::from("key,value\n");
    let b = &r.best;
    for (k, v) in [("alpha0", b.alpha0), ("alpha1", b.alpha1), ("beta0", b.beta0), ("beta1", b.beta1), ("tau", b.tau)]
    {
        let _ = writeln!(out, "{k},{v}");
    }
    let _ = writeln!(out, "objective,{}", r.objective);
    let _ = writeln!(out, "evaluations,{}", r.evaluations);
    let _ = writeln!(out, "improved,{}", r.improved);
    for (i, s) in r.starts.iter().enumerate() {
        let c = &s.converged_to;
        let _ = writeln!(
            out,
            "start_{i},{} {} {} {} {} -> {} {} {} {} {} objective {} converged {}",
            s.initial.alpha0,
            s.initial.alpha1,
            s.initial.beta0,
            s.initial.beta1,
            s.initial.tau,
            c.alpha0,
            c.alpha1,
            c.beta0,
            c.beta1,
            c.tau,
            s.objective,
            s.converged
        );
    }
    out
}

pub struct OptimizeArgs<'a> {
    pub setup: Setup,
    pub games: &'a Path,
    pub train_until: u32,
    pub starts: Vec<Hyperparameters>,
    pub settings: OptimizerSettings,
    pub out: Option<&'a Path>,
    pub trace: Option<&'a Path>,
}

pub fn run_optimize(a: OptimizeArgs) -> Result<()> {
    let games = read_games(a.games)?;
    if games.is_empty() {
        bail!("{} contains no games", a.games.display());
    }
    let first = a.setup.state.period;
    let last = games.iter().map(|g| g.period).max().unwrap_or(first);
    let data = PeriodData::with_span(games.into_iter().filter(|g| g.period >= first), first, last.max(first))?;
    let starts = if a.starts.is_empty() { default_starts() } else { a.starts };
    let r = optimize(&data, &a.setup.state, &a.setup.engine, a.train_until, &starts, &a.settings)?;
    if let Some(path) = a.trace {
        emit(Some(path), &r.trace_delimited(','))?;
    }
    emit(a.out, &optimization_table(&r))
}

pub fn settings(fix_alpha: bool, max_evals: usize, tol: f64) -> OptimizerSettings {
    OptimizerSettings {
        simplex: NelderMeadSettings { spread_tol: tol, max_evals },
        fix_alpha,
        ..Default::default()
    }
}

pub enum ValidateInput<'a> {
    Recorded { setup: Setup, games: &'a Path },
    Synthetic { n: usize, seed: u64, h: Hyperparameters, engine: EngineConfig },
}

pub fn validate(input: ValidateInput, order: usize, stratify: bool, out: Option<&Path>) -> Result<()> {
    let (games, h, engine) = match input {
        ValidateInput::Recorded { setup, games } => {
            let mut singles = Vec::new();
            for g in read_games(games)?.iter().filter(|g| g.white != g.black) {
                let w = setup.state.belief_or_default(&g.white, &setup.engine);
                let b = setup.state.belief_or_default(&g.black, &setup.engine);
                singles.push(SingleGame { focal: w, opponent: b, outcome: g.result, color: Color::White });
                singles.push(SingleGame { focal: b, opponent: w, outcome: g.result.reversed(), color: Color::Black });
            }
            (singles, setup.h, setup.engine)
        }
        ValidateInput::Synthetic { n, seed, h, engine } => (synthetic_single_games(n, &h, &engine, seed)?, h, engine),
    };
    let report = compare_updates(&games, &h, &engine, order, stratify)?;
    for (i, reason) in &report.excluded {
        eprintln!("warning: game {} excluded: {reason}", i + 1);
    }
    emit(out, &report.to_delimited(','))
}

pub struct SimulateArgs {
    pub h: Hyperparameters,
    pub engine: EngineConfig,
    pub players: usize,
    pub periods: u32,
    pub games_per_period: usize,
    pub pairing: PairingArg,
    pub band_width: f64,
    pub seed: u64,
    pub games_out: Option<PathBuf>,
    pub truth_out: Option<PathBuf>,
    pub recover: bool,
    pub train_until: Option<u32>,
    pub settings: OptimizerSettings,
    pub report: Option<PathBuf>,
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let pairing = match a.pairing {
        PairingArg::Banded => Pairing::RatingBanded { width: a.band_width },
        PairingArg::Uniform => Pairing::UniformRandom,
    };
    let prior = a.engine.default_prior();
    let league = LeagueConfig {
        players: a.players,
        periods: a.periods,
        games_per_period: a.games_per_period,
        pairing,
        initial_mean: prior.mu,
        initial_sd: prior.sigma,
        seed: a.seed,
    };
    league.validate()?;
    if a.recover {
        let Some(train_until) = a.train_until else { bail!("--recover needs --train-until") };
        let r = recovery_experiment(&league, &a.h, &a.engine, train_until, &default_starts(), &a.settings)?;
        emit(a.report.as_deref(), &r.to_delimited(','))?;
    }
    if a.games_out.is_none() && a.truth_out.is_none() {
        if !a.recover {
            bail!("nothing to write: give --games-out, --truth-out or --recover");
        }
        return Ok(());
    }
    let sim = simulate_league(&league, &a.h)?;
    if let Some(path) = &a.games_out {
        let mut buf = Vec::new();
        store::write_games(&mut buf, &sim.games)?;
        emit(Some(path), std::str::from_utf8(&buf)?)?;
    }
    if let Some(path) = &a.truth_out {
        let mut text = String::from("player,period,theta\n");
        for (i, id) in sim.players.iter().enumerate() {
            for t in 1..=a.periods {
                let _ = writeln!(text, "{id},{t},{:?}", sim.strengths.at(i, t));
            }
        }
        emit(Some(path), &text)?;
    }
    Ok(())
}
