//! Synthetic leagues drawn from the generative model.
//!
//! True strengths follow a normal random walk with innovation sd `τ`, and
//! each game's result is sampled from the outcome model at the players' true
//! strengths. Every random draw comes from a ChaCha stream selected by
//! purpose (one stream per player for strengths, one per period for games),
//! so results depend only on the configuration and seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameRecord, PlayerId};
use crate::hyperopt::{optimize, OptimizationResult, OptimizerSettings, PeriodData};
use crate::model::{outcome_probabilities, Color, Hyperparameters, Outcome};
use crate::oracle::SingleGame;
use crate::update::{run_period, EngineConfig, RatingState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Pairing {
    UniformRandom,
    /// Opponents drawn among players whose current ratings (posterior means
    /// under the generating hyperparameters) are within `width` latent units.
    RatingBanded { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeagueConfig {
    pub players: usize,
    pub periods: u32,
    /// Games per player per period (each game counts for both players).
    pub games_per_period: usize,
    pub pairing: Pairing,
    pub initial_mean: f64,
    pub initial_sd: f64,
    pub seed: u64,
}

impl Default for LeagueConfig {
    fn default() -> Self {
        let prior = EngineConfig::default().default_prior();
        LeagueConfig {
            players: 500,
            periods: 12,
            games_per_period: 20,
            pairing: Pairing::RatingBanded { width: 1.0 },
            initial_mean: prior.mu,
            initial_sd: prior.sigma,
            seed: 1,
        }
    }
}

impl LeagueConfig {
    pub fn validate(&self) -> Result<()> {
        if self.players < 2 {
            return Err(Error::invalid("a league needs at least two players"));
        }
        if self.periods == 0 || self.games_per_period == 0 {
            return Err(Error::invalid("periods and games_per_period must be positive"));
        }
        if !(self.initial_sd >= 0.0) || !self.initial_mean.is_finite() {
            return Err(Error::invalid("initial strength distribution must be finite"));
        }
        if let Pairing::RatingBanded { width } = self.pairing {
            if !(width > 0.0) {
                return Err(Error::invalid("band width must be positive"));
            }
        }
        Ok(())
    }

    pub fn player_id(&self, index: usize) -> PlayerId {
        PlayerId::new(format!("p{index:05}"))
    }
}

const STRENGTH_STREAM: u64 = 0;
const GAME_STREAM: u64 = 1 << 40;

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// True strengths indexed `[player][period − 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueStrengths {
    pub values: Vec<Vec<f64>>,
}

impl TrueStrengths {
    pub fn at(&self, player: usize, period: u32) -> f64 {
        self.values[player][period as usize - 1]
    }
}

pub fn simulate_strengths(cfg: &LeagueConfig, h: &Hyperparameters) -> Result<TrueStrengths> {
    cfg.validate()?;
    h.validate()?;
    let start = Normal::new(cfg.initial_mean, cfg.initial_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let step = Normal::new(0.0, h.tau).map_err(|e| Error::invalid(e.to_string()))?;
    let values = (0..cfg.players)
        .map(|i| {
            let mut rng = stream(cfg.seed, STRENGTH_STREAM + i as u64);
            let mut theta = start.sample(&mut rng);
            let mut path = Vec::with_capacity(cfg.periods as usize);
            path.push(theta);
            for _ in 1..cfg.periods {
                theta += step.sample(&mut rng);
                path.push(theta);
            }
            path
        })
        .collect();
    Ok(TrueStrengths { values })
}

fn sample_outcome(rng: &mut ChaCha8Rng, p: [f64; 3]) -> Outcome {
    let u: f64 = rng.gen();
    if u < p[0] {
        Outcome::Win
    } else if u < p[0] + p[1] {
        Outcome::Draw
    } else {
        Outcome::Loss
    }
}

/// Pairs players each period and samples results at the true strengths.
///
/// Banded pairing looks at published ratings, not true strengths: the
/// league is filtered period by period with `h` and the default engine
/// settings, and pairings use the priors in force at the start of each
/// period.
pub fn simulate_games(strengths: &TrueStrengths, cfg: &LeagueConfig, h: &Hyperparameters) -> Result<Vec<GameRecord>> {
    cfg.validate()?;
    if strengths.values.len() != cfg.players || strengths.values.iter().any(|p| p.len() < cfg.periods as usize) {
        return Err(Error::invalid("strength table does not cover every player and period"));
    }
    let ids: Vec<PlayerId> = (0..cfg.players).map(|i| cfg.player_id(i)).collect();
    let games_each_period = (cfg.players * cfg.games_per_period).div_ceil(2);
    let mut games = Vec::with_capacity(games_each_period * cfg.periods as usize);
    let engine = EngineConfig::default();
    let mut ratings = RatingState::new(1);

    for period in 1..=cfg.periods {
        let mut rng = stream(cfg.seed, GAME_STREAM + period as u64);
        let theta: Vec<f64> = (0..cfg.players).map(|i| strengths.at(i, period)).collect();
        let published: Vec<f64> = ids.iter().map(|id| ratings.belief_or_default(id, &engine).mu).collect();
        let mut order: Vec<usize> = (0..cfg.players).collect();
        order.sort_by(|&a, &b| published[a].total_cmp(&published[b]).then(a.cmp(&b)));
        let sorted: Vec<f64> = order.iter().map(|&i| published[i]).collect();
        let mut rank = vec![0; cfg.players];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }

        for _ in 0..games_each_period {
            let i = rng.gen_range(0..cfg.players);
            let j = match cfg.pairing {
                Pairing::UniformRandom => {
                    let j = rng.gen_range(0..cfg.players - 1);
                    if j >= i { j + 1 } else { j }
                }
                Pairing::RatingBanded { width } => {
                    let lo = sorted.partition_point(|&t| t < published[i] - width);
                    let hi = sorted.partition_point(|&t| t <= published[i] + width);
                    let r = rank[i];
                    if hi - lo <= 1 {
                        // nobody in band: nearest neighbour by rank
                        let candidates: Vec<usize> = [r.checked_sub(1), Some(r + 1)]
                            .into_iter()
                            .flatten()
                            .filter(|&k| k < cfg.players)
                            .collect();
                        let k = *candidates
                            .iter()
                            .min_by(|&&a, &&b| (sorted[a] - published[i]).abs().total_cmp(&(sorted[b] - published[i]).abs()))
                            .unwrap();
                        order[k]
                    } else {
                        let k = rng.gen_range(lo..hi - 1);
                        order[if k >= r { k + 1 } else { k }]
                    }
                }
            };
            let (white, black) = if rng.gen::<bool>() { (i, j) } else { (j, i) };
            let p = outcome_probabilities(theta[white], theta[black], Color::White, h)?.as_array();
            let result = sample_outcome(&mut rng, p);
            games.push(GameRecord { period, white: ids[white].clone(), black: ids[black].clone(), result });
        }
        if matches!(cfg.pairing, Pairing::RatingBanded { .. }) && period < cfg.periods {
            let start = games.len() - games_each_period;
            ratings = run_period(&ratings, &games[start..], h, &engine)?.state;
        }
    }
    Ok(games)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedLeague {
    pub config: LeagueConfig,
    pub players: Vec<PlayerId>,
    pub strengths: TrueStrengths,
    pub games: Vec<GameRecord>,
}

pub fn simulate_league(cfg: &LeagueConfig, h: &Hyperparameters) -> Result<SimulatedLeague> {
    let strengths = simulate_strengths(cfg, h)?;
    let games = simulate_games(&strengths, cfg, h)?;
    Ok(SimulatedLeague {
        config: *cfg,
        players: (0..cfg.players).map(|i| cfg.player_id(i)).collect(),
        strengths,
        games,
    })
}

impl SimulatedLeague {
    /// Mean absolute error between posterior means and true strengths after
    /// each period, filtering from default priors under `h`.
    pub fn tracking_error(&self, h: &Hyperparameters, engine: &EngineConfig) -> Result<Vec<(u32, f64)>> {
        let data = PeriodData::with_span(self.games.iter().cloned(), 1, self.config.periods)?;
        let mut state = RatingState::new(1);
        let mut out = Vec::new();
        for t in 1..=self.config.periods {
            let result = run_period(&state, data.games(t), h, engine)?;
            let mut err = 0.0;
            let mut n = 0usize;
            for u in &result.updates {
                let idx = self.players.binary_search(&u.player).map_err(|_| Error::invalid("unknown player"))?;
                err += (u.posterior.mu - self.strengths.at(idx, t)).abs();
                n += 1;
            }
            out.push((t, err / n.max(1) as f64));
            state = result.state;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub true_h: Hyperparameters,
    pub fit: OptimizationResult,
    /// Per-period tracking error under the recovered hyperparameters.
    pub tracking: Vec<(u32, f64)>,
}

impl RecoveryReport {
    pub fn to_delimited(&self, sep: char) -> String {
        let (t, b) = (&self.true_h, &self.fit.best);
        let mut out = format!("parameter{sep}true{sep}recovered\n");
        for (name, x, y) in [
            ("alpha0", t.alpha0, b.alpha0),
            ("alpha1", t.alpha1, b.alpha1),
            ("beta0", t.beta0, b.beta0),
            ("beta1", t.beta1, b.beta1),
            ("tau", t.tau, b.tau),
        ] {
            out.push_str(&format!("{name}{sep}{x}{sep}{y}\n"));
        }
        out.push_str(&format!("objective{sep}{sep}{}\n", self.fit.objective));
        for (period, mae) in &self.tracking {
            out.push_str(&format!("tracking_mae_period_{period}{sep}{sep}{mae}\n"));
        }
        out
    }
}

/// Simulates a league under `true_h`, refits the hyperparameters by
/// predictive likelihood and measures how well ratings track the truth.
pub fn recovery_experiment(
    league: &LeagueConfig,
    true_h: &Hyperparameters,
    engine: &EngineConfig,
    train_until: u32,
    starts: &[Hyperparameters],
    settings: &OptimizerSettings,
) -> Result<RecoveryReport> {
    let sim = simulate_league(league, true_h)?;
    let data = PeriodData::with_span(sim.games.iter().cloned(), 1, league.periods)?;
    let fit = optimize(&data, &RatingState::new(1), engine, train_until, starts, settings)?;
    let tracking = sim.tracking_error(&fit.best, engine)?;
    Ok(RecoveryReport { true_h: *true_h, fit, tracking })
}

const SINGLE_GAME_STREAM: u64 = 1 << 41;

/// Independent single games between rated players, for comparing the
/// approximate update with the quadrature oracle. Prior means come from
/// ratings drawn around the engine's default mean with the default sd, every
/// prior has the rated deviation, and each result is sampled from the model
/// at strengths drawn from the two priors.
pub fn synthetic_single_games(
    n: usize,
    h: &Hyperparameters,
    engine: &EngineConfig,
    seed: u64,
) -> Result<Vec<SingleGame>> {
    h.validate()?;
    engine.validate()?;
    let mut rng = stream(seed, SINGLE_GAME_STREAM);
    let ratings = Normal::new(engine.default_mean_elo, engine.default_sd_elo).map_err(|e| Error::invalid(e.to_string()))?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let prior = |rng: &mut ChaCha8Rng| engine.rated_prior(ratings.sample(rng));
    (0..n)
        .map(|_| {
            let focal = prior(&mut rng)?;
            let opponent = prior(&mut rng)?;
            let color = if rng.gen::<bool>() { Color::White } else { Color::Black };
            let ti = focal.mu + focal.sigma * unit.sample(&mut rng);
            let tj = opponent.mu + opponent.sigma * unit.sample(&mut rng);
            let outcome = sample_outcome(&mut rng, outcome_probabilities(ti, tj, color, h)?.as_array());
            Ok(SingleGame { focal, opponent, outcome, color })
        })
        .collect()
}

/// Shuffles a copy of `games` deterministically (used to check order
/// independence).
pub fn shuffled(games: &[GameRecord], seed: u64) -> Vec<GameRecord> {
    let mut out = games.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const T2: Hyperparameters = Hyperparameters::QUASI_OPTIMIZED;

    fn small(seed: u64) -> LeagueConfig {
        LeagueConfig { players: 40, periods: 3, games_per_period: 4, seed, ..Default::default() }
    }

    #[test]
    fn zero_tau_gives_constant_paths() {
        let s = simulate_strengths(&small(3), &Hyperparameters { tau: 0.0, ..T2 }).unwrap();
        assert!(s.values.iter().all(|p| p.iter().all(|v| *v == p[0])));
    }

    #[test]
    fn same_seed_same_league() {
        let a = simulate_league(&small(9), &T2).unwrap();
        let b = simulate_league(&small(9), &T2).unwrap();
        assert_eq!(a, b);
        let c = simulate_league(&small(10), &T2).unwrap();
        assert_ne!(a.games, c.games);
    }

    #[test]
    fn games_reference_valid_players_and_periods() {
        let cfg = small(4);
        let league = simulate_league(&cfg, &T2).unwrap();
        assert_eq!(league.games.len(), 3 * 40 * 4 / 2);
        for g in &league.games {
            assert_ne!(g.white, g.black);
            assert!(league.players.binary_search(&g.white).is_ok());
            assert!((1..=3).contains(&g.period));
        }
    }

    #[test]
    fn banded_pairing_follows_published_ratings() {
        let cfg = LeagueConfig { players: 200, periods: 2, games_per_period: 10, seed: 5, ..Default::default() };
        let league = simulate_league(&cfg, &T2).unwrap();
        let engine = EngineConfig::default();
        let first: Vec<_> = league.games.iter().filter(|g| g.period == 1).cloned().collect();
        let rated = run_period(&RatingState::new(1), &first, &T2, &engine).unwrap().state;
        let mu = |id: &PlayerId| rated.belief_or_default(id, &engine).mu;
        let second: Vec<_> = league.games.iter().filter(|g| g.period == 2).collect();
        let within = second.iter().filter(|g| (mu(&g.white) - mu(&g.black)).abs() <= 1.0).count();
        assert!(within as f64 / second.len() as f64 > 0.99);
        // with equal priors in the first period, band pairing is unrestricted
        let spread = first
            .iter()
            .filter(|g| {
                let idx = |id: &PlayerId| league.players.binary_search(id).unwrap();
                (league.strengths.at(idx(&g.white), 1) - league.strengths.at(idx(&g.black), 1)).abs() > 1.0
            })
            .count();
        assert!(spread > first.len() / 4);
    }

    #[test]
    fn synthetic_single_games_are_rated_and_reproducible() {
        let engine = EngineConfig::default();
        let a = synthetic_single_games(200, &T2, &engine, 3).unwrap();
        assert_eq!(a, synthetic_single_games(200, &T2, &engine, 3).unwrap());
        assert_ne!(a, synthetic_single_games(200, &T2, &engine, 4).unwrap());
        let rated = engine.rated_prior(1800.0).unwrap().sigma;
        assert!(a.iter().all(|g| g.focal.sigma == rated && g.opponent.sigma == rated));
        let draws = a.iter().filter(|g| g.outcome == Outcome::Draw).count();
        assert!(draws > 100 && draws < 180, "{draws}");
    }

    #[test]
    fn invalid_configs() {
        assert!(LeagueConfig { players: 1, ..small(1) }.validate().is_err());
        assert!(LeagueConfig { periods: 0, ..small(1) }.validate().is_err());
        assert!(LeagueConfig { pairing: Pairing::RatingBanded { width: 0.0 }, ..small(1) }.validate().is_err());
    }
}
