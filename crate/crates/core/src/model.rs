//! Outcome probability model for win/draw/loss games.
//!
//! For a focal player `i` facing opponent `j` the three outcome probabilities
//! are a multinomial logit with numerators
//!
//! ```text
//! win:  exp(θi + x(α0 + α1·m)/4)
//! loss: exp(θj − x(α0 + α1·m)/4)
//! draw: exp(β0 + (1 + β1)·m)          where m = (θi + θj)/2
//! ```
//!
//! and `x = +1` when `i` has white, `−1` otherwise. With `β1 > 0` the draw
//! probability rises with the average strength of the pair.

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elo points per unit of latent strength (≈ 173.72).
pub const ELO_PER_LATENT: f64 = 400.0 / LN_10;

/// Elo rating corresponding to latent strength zero.
pub const ELO_ORIGIN: f64 = 1500.0;

/// Shared model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// White-advantage intercept.
    pub alpha0: f64,
    /// White-advantage slope in average strength.
    pub alpha1: f64,
    /// Draw intercept.
    pub beta0: f64,
    /// Draw slope in average strength.
    pub beta1: f64,
    /// Innovation standard deviation per rating period.
    pub tau: f64,
}

impl Hyperparameters {
    /// Values maximizing predictive likelihood on six years of correspondence-chess games.
    pub const OPTIMIZED: Hyperparameters = Hyperparameters {
        alpha0: 0.0,
        alpha1: 0.0,
        beta0: 0.35338,
        beta1: 0.57041,
        tau: 0.46040,
    };

    /// Moderated values for deployment: a flatter draw curve and lower volatility.
    pub const QUASI_OPTIMIZED: Hyperparameters = Hyperparameters {
        alpha0: 0.0,
        alpha1: 0.0,
        beta0: 1.09861,
        beta1: 0.17037,
        tau: 0.14391,
    };

    pub fn validate(&self) -> Result<()> {
        let fields = [self.alpha0, self.alpha1, self.beta0, self.beta1, self.tau];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite hyperparameter in {self:?}")));
        }
        if self.tau < 0.0 {
            return Err(Error::invalid(format!("tau must be >= 0, got {}", self.tau)));
        }
        Ok(())
    }
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self::QUASI_OPTIMIZED
    }
}

/// Which pieces the focal player has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    White,
    Black,
}

impl Color {
    /// `+1` for white, `−1` for black.
    pub fn sign(self) -> f64 {
        match self {
            Color::White => 1.0,
            Color::Black => -1.0,
        }
    }

    pub fn opposite(self) -> Color {
        match self {
            Color::White => Color::Black,
            Color::Black => Color::White,
        }
    }
}

/// Game result from the focal player's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Win,
    Draw,
    Loss,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::Win, Outcome::Draw, Outcome::Loss];

    /// Conventional score: 1, ½ or 0.
    pub fn score(self) -> f64 {
        match self {
            Outcome::Win => 1.0,
            Outcome::Draw => 0.5,
            Outcome::Loss => 0.0,
        }
    }

    /// The same game seen from the opponent's side.
    pub fn reversed(self) -> Outcome {
        match self {
            Outcome::Win => Outcome::Loss,
            Outcome::Draw => Outcome::Draw,
            Outcome::Loss => Outcome::Win,
        }
    }

    pub fn is_decisive(self) -> bool {
        self != Outcome::Draw
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Outcome::Win => 0,
            Outcome::Draw => 1,
            Outcome::Loss => 2,
        }
    }
}

/// Probabilities of the three outcomes for an ordered pair of players.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub win: f64,
    pub draw: f64,
    pub loss: f64,
}

impl OutcomeDistribution {
    pub fn prob(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Win => self.win,
            Outcome::Draw => self.draw,
            Outcome::Loss => self.loss,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.win, self.draw, self.loss]
    }

    /// Probability of a win given that the game is decisive.
    pub fn decisive_win_probability(&self) -> f64 {
        self.win / (self.win + self.loss)
    }
}

/// Coefficients multiplying the focal strength in each outcome exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreCoefficients {
    pub win: f64,
    pub draw: f64,
    pub loss: f64,
}

impl ScoreCoefficients {
    pub fn get(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Win => self.win,
            Outcome::Draw => self.draw,
            Outcome::Loss => self.loss,
        }
    }
}

/// Expected score and expected squared score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreMoments {
    pub s1: f64,
    pub s2: f64,
}

/// First and second derivatives of the outcome probabilities with respect
/// to the focal strength, indexed win, draw, loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityDerivatives {
    pub first: [f64; 3],
    pub second: [f64; 3],
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("non-finite strength in {values:?}")))
    }
}

/// Unnormalized log numerators, indexed win, draw, loss.
fn log_numerators(theta_i: f64, theta_j: f64, color: Color, h: &Hyperparameters) -> [f64; 3] {
    let mean = 0.5 * (theta_i + theta_j);
    let white_shift = color.sign() * (h.alpha0 + h.alpha1 * mean) / 4.0;
    [
        theta_i + white_shift,
        h.beta0 + (1.0 + h.beta1) * mean,
        theta_j - white_shift,
    ]
}

/// Log-probabilities of win, draw and loss. Stable for large strengths.
pub fn log_outcome_probabilities(
    theta_i: f64,
    theta_j: f64,
    color: Color,
    h: &Hyperparameters,
) -> Result<[f64; 3]> {
    check_finite(&[theta_i, theta_j])?;
    let z = log_numerators(theta_i, theta_j, color, h);
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok(z.map(|v| v - log_sum))
}

/// Win/draw/loss probabilities for the focal player.
pub fn outcome_probabilities(
    theta_i: f64,
    theta_j: f64,
    color: Color,
    h: &Hyperparameters,
) -> Result<OutcomeDistribution> {
    check_finite(&[theta_i, theta_j])?;
    let z = log_numerators(theta_i, theta_j, color, h);
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - max).exp());
    let total: f64 = e.iter().sum();
    Ok(OutcomeDistribution {
        win: e[0] / total,
        draw: e[1] / total,
        loss: e[2] / total,
    })
}

/// Outcome-specific scores. With `draw_score_override` the draw coefficient
/// is pinned to ½, which removes the upward drift that `β1 > 0` would give
/// two equally rated players who draw.
pub fn score_coefficients(
    color: Color,
    h: &Hyperparameters,
    draw_score_override: bool,
) -> ScoreCoefficients {
    let white = color.sign() * h.alpha1 / 8.0;
    ScoreCoefficients {
        win: 1.0 + white,
        draw: if draw_score_override { 0.5 } else { (1.0 + h.beta1) / 2.0 },
        loss: -white,
    }
}

pub fn score_moments(dist: &OutcomeDistribution, coeffs: &ScoreCoefficients) -> ScoreMoments {
    let (p, a) = (dist.as_array(), [coeffs.win, coeffs.draw, coeffs.loss]);
    ScoreMoments {
        s1: (0..3).map(|k| a[k] * p[k]).sum(),
        s2: (0..3).map(|k| a[k] * a[k] * p[k]).sum(),
    }
}

/// Derivatives of the outcome probabilities with respect to `theta_i`,
/// computed from whichever score coefficients are active.
pub fn probability_derivatives(
    theta_i: f64,
    theta_j: f64,
    color: Color,
    h: &Hyperparameters,
    draw_score_override: bool,
) -> Result<ProbabilityDerivatives> {
    let dist = outcome_probabilities(theta_i, theta_j, color, h)?;
    let coeffs = score_coefficients(color, h, draw_score_override);
    Ok(derivatives_from(&dist, &coeffs))
}

fn derivatives_from(
    dist: &OutcomeDistribution,
    coeffs: &ScoreCoefficients,
) -> ProbabilityDerivatives {
    let ScoreMoments { s1, s2 } = score_moments(dist, coeffs);
    let p = dist.as_array();
    let a = [coeffs.win, coeffs.draw, coeffs.loss];
    let mut first = [0.0; 3];
    let mut second = [0.0; 3];
    for k in 0..3 {
        first[k] = p[k] * (a[k] - s1);
        second[k] = p[k] * (a[k] * a[k] - s2 - 2.0 * s1 * (a[k] - s1));
    }
    ProbabilityDerivatives { first, second }
}

pub fn elo_to_latent(rating: f64) -> f64 {
    (rating - ELO_ORIGIN) / ELO_PER_LATENT
}

pub fn latent_to_elo(theta: f64) -> f64 {
    ELO_ORIGIN + ELO_PER_LATENT * theta
}

/// Converts a rating deviation in Elo points to latent units.
pub fn elo_sd_to_latent(sd: f64) -> f64 {
    sd / ELO_PER_LATENT
}

pub fn latent_sd_to_elo(sigma: f64) -> f64 {
    sigma * ELO_PER_LATENT
}

/// Classical Elo expected score of `rating_i` against `rating_j`.
pub fn elo_winning_expectancy(rating_i: f64, rating_j: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf(-(rating_i - rating_j) / 400.0))
}
