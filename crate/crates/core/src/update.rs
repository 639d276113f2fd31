//! Per-period approximate filtering.
//!
//! Each player's prior `N(μ, σ²)` is combined with the period's games. The
//! opponent's strength is integrated out with a 2-point Gauss-Hermite rule
//! (nodes `μj ± σj`), and the resulting log-posterior is replaced by a normal
//! density from one Newton-Raphson step taken at the prior mean. All players
//! are updated against the same prior snapshot, so the per-player updates
//! are independent and run in parallel.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameRecord, PlayerId};
use crate::model::{
    elo_sd_to_latent, elo_to_latent, log_outcome_probabilities, outcome_probabilities,
    score_coefficients, score_moments, Color, Hyperparameters, Outcome, ScoreMoments,
};

/// Normal belief about a player's latent strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub mu: f64,
    pub sigma: f64,
}

impl Belief {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        let b = Belief { mu, sigma };
        b.validate()?;
        Ok(b)
    }

    pub fn from_elo(rating: f64, sd: f64) -> Result<Self> {
        Belief::new(elo_to_latent(rating), elo_sd_to_latent(sd))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::invalid(format!(
                "belief needs finite mean and positive sigma, got mu={} sigma={}",
                self.mu, self.sigma
            )));
        }
        Ok(())
    }
}

/// Engine policy constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Posterior deviations at or above this are carried forward without
    /// adding innovation variance.
    pub sigma_cap: f64,
    /// Pin the draw score coefficient to ½.
    pub draw_score_override: bool,
    pub default_mean_elo: f64,
    pub default_sd_elo: f64,
    /// Rating deviation assigned to players seeded from an existing rating.
    pub rated_sd_elo: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            sigma_cap: 0.691,
            draw_score_override: true,
            default_mean_elo: 1800.0,
            default_sd_elo: 250.0,
            rated_sd_elo: 100.0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_cap > 0.0 && self.sigma_cap.is_finite()) {
            return Err(Error::invalid(format!("sigma_cap must be positive, got {}", self.sigma_cap)));
        }
        if !(self.default_sd_elo > 0.0 && self.rated_sd_elo > 0.0) || !self.default_mean_elo.is_finite() {
            return Err(Error::invalid("prior settings must be finite with positive deviations"));
        }
        Ok(())
    }

    /// Prior for a player with no rating history.
    pub fn default_prior(&self) -> Belief {
        Belief {
            mu: elo_to_latent(self.default_mean_elo),
            sigma: elo_sd_to_latent(self.default_sd_elo),
        }
    }

    /// Prior for a player seeded from an existing Elo rating.
    pub fn rated_prior(&self, rating: f64) -> Result<Belief> {
        Belief::from_elo(rating, self.rated_sd_elo)
    }
}

/// Contribution of one game to the derivatives of the focal log-posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameTerm {
    pub delta1: f64,
    pub delta2: f64,
    /// Sum of the realized outcome's probability at both opponent nodes.
    pub p_observed: f64,
}

/// Derivative terms for one game, evaluated at the focal prior mean.
pub fn game_term(
    focal: &Belief,
    opponent: &Belief,
    outcome: Outcome,
    color: Color,
    h: &Hyperparameters,
    cfg: &EngineConfig,
) -> Result<GameTerm> {
    focal.validate()?;
    opponent.validate()?;
    let coeffs = score_coefficients(color, h, cfg.draw_score_override);
    let a = coeffs.get(outcome);
    let k = outcome.index();

    let nodes = [opponent.mu - opponent.sigma, opponent.mu + opponent.sigma];
    let mut log_p = [0.0; 2];
    let mut d1 = [0.0; 2];
    let mut d2 = [0.0; 2];
    for (n, &theta_j) in nodes.iter().enumerate() {
        let dist = outcome_probabilities(focal.mu, theta_j, color, h)?;
        let ScoreMoments { s1, s2 } = score_moments(&dist, &coeffs);
        log_p[n] = log_outcome_probabilities(focal.mu, theta_j, color, h)?[k];
        // p'/p and p''/p for the realized outcome
        d1[n] = a - s1;
        d2[n] = a * a - s2 - 2.0 * s1 * (a - s1);
    }

    // node weights P±/Pj, computed from log-probabilities
    let max = log_p[0].max(log_p[1]);
    let w = [(log_p[0] - max).exp(), (log_p[1] - max).exp()];
    let total = w[0] + w[1];
    let q = [w[0] / total, w[1] / total];

    let delta1 = q[0] * d1[0] + q[1] * d1[1];
    let delta2 = q[0] * d2[0] + q[1] * d2[1] - delta1 * delta1;
    Ok(GameTerm {
        delta1,
        delta2,
        p_observed: log_p[0].exp() + log_p[1].exp(),
    })
}

/// One-step Newton-Raphson posterior from the prior and the period's terms.
pub fn period_update(prior: &Belief, terms: &[GameTerm]) -> Result<Belief> {
    prior.validate()?;
    if terms.is_empty() {
        return Ok(*prior);
    }
    let sum1: f64 = terms.iter().map(|t| t.delta1).sum();
    let sum2: f64 = terms.iter().map(|t| t.delta2).sum();
    let precision = prior.sigma.powi(-2) - sum2;
    if !(precision > 0.0 && precision.is_finite()) || !sum1.is_finite() {
        return Err(Error::degenerate(format!(
            "posterior precision {precision} (sum delta1 {sum1}, sum delta2 {sum2})"
        )));
    }
    Ok(Belief {
        mu: prior.mu + sum1 / precision,
        sigma: precision.recip().sqrt(),
    })
}

/// Propagates a posterior to the next period's prior under the random walk,
/// unless the deviation has already reached the cap.
pub fn advance_time(post: &Belief, h: &Hyperparameters, cfg: &EngineConfig) -> Belief {
    if post.sigma < cfg.sigma_cap {
        Belief {
            mu: post.mu,
            sigma: post.sigma.hypot(h.tau),
        }
    } else {
        *post
    }
}

/// Tracked state of one player.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub belief: Belief,
    pub games_played: u64,
}

/// Priors of every tracked player at the start of `period`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RatingState {
    pub period: u32,
    pub players: BTreeMap<PlayerId, PlayerState>,
}

impl RatingState {
    pub fn new(period: u32) -> Self {
        RatingState { period, players: BTreeMap::new() }
    }

    /// The player's prior, or the configured default for a newcomer.
    pub fn belief_or_default(&self, player: &PlayerId, cfg: &EngineConfig) -> Belief {
        self.players
            .get(player)
            .map(|p| p.belief)
            .unwrap_or_else(|| cfg.default_prior())
    }
}

/// Prior → posterior change for one player in one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodUpdate {
    pub player: PlayerId,
    pub prior: Belief,
    pub posterior: Belief,
    pub games: usize,
}

/// A game excluded from processing.
#[derive(Debug, Clone, PartialEq)]
pub struct GameReject {
    /// Position in the submitted list.
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct PeriodResult {
    /// Priors for the next period.
    pub state: RatingState,
    pub updates: Vec<PeriodUpdate>,
    pub rejects: Vec<GameReject>,
}

/// Runs one rating period: every player's posterior is computed against the
/// opponents' priors, then every tracked player is advanced in time.
pub fn run_period(
    state: &RatingState,
    games: &[GameRecord],
    h: &Hyperparameters,
    cfg: &EngineConfig,
) -> Result<PeriodResult> {
    h.validate()?;
    cfg.validate()?;

    let mut rejects = Vec::new();
    let mut schedule: BTreeMap<PlayerId, Vec<(PlayerId, Color, Outcome)>> = state
        .players
        .keys()
        .map(|id| (id.clone(), Vec::new()))
        .collect();
    for (index, game) in games.iter().enumerate() {
        if game.white == game.black {
            rejects.push(GameReject { index, reason: format!("self-play by {}", game.white) });
            continue;
        }
        if game.period != state.period {
            rejects.push(GameReject {
                index,
                reason: format!("game period {} but state is at period {}", game.period, state.period),
            });
            continue;
        }
        schedule
            .entry(game.white.clone())
            .or_default()
            .push((game.black.clone(), Color::White, game.result));
        schedule
            .entry(game.black.clone())
            .or_default()
            .push((game.white.clone(), Color::Black, game.result.reversed()));
    }

    let priors: BTreeMap<&PlayerId, PlayerState> = schedule
        .keys()
        .map(|id| {
            let ps = state.players.get(id).copied().unwrap_or(PlayerState {
                belief: cfg.default_prior(),
                games_played: 0,
            });
            (id, ps)
        })
        .collect();

    let mut work: Vec<(&PlayerId, Vec<(PlayerId, Color, Outcome)>)> =
        schedule.iter().map(|(id, g)| (id, g.clone())).collect();
    // fixed summation order: independent of submission order
    for (_, g) in work.iter_mut() {
        g.sort();
    }

    let updates: Vec<PeriodUpdate> = work
        .par_iter()
        .map(|(id, entries)| {
            let prior = priors[id].belief;
            let terms = entries
                .iter()
                .map(|(opp, color, outcome)| game_term(&prior, &priors[opp].belief, *outcome, *color, h, cfg))
                .collect::<Result<Vec<_>>>()?;
            let posterior = period_update(&prior, &terms).map_err(|e| match e {
                Error::Degenerate(msg) => Error::degenerate(format!("player {id}: {msg}")),
                other => other,
            })?;
            Ok(PeriodUpdate {
                player: (*id).clone(),
                prior,
                posterior,
                games: entries.len(),
            })
        })
        .collect::<Result<_>>()?;

    let players = updates
        .iter()
        .map(|u| {
            let played = priors[&u.player].games_played + u.games as u64;
            (
                u.player.clone(),
                PlayerState {
                    belief: advance_time(&u.posterior, h, cfg),
                    games_played: played,
                },
            )
        })
        .collect();

    Ok(PeriodResult {
        state: RatingState { period: state.period + 1, players },
        updates,
        rejects,
    })
}
