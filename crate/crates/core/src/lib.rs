//! Dynamic ratings for win/draw/loss games with strength-dependent draw
//! probabilities.
//!
//! Ratings are filtered period by period: [`update::run_period`] turns priors
//! and a period's games into posteriors with a closed-form approximation, and
//! [`oracle`] recomputes single-game posteriors by nested Gauss-Hermite
//! quadrature to check it. [`hyperopt`] tunes the model constants on
//! one-step-ahead predictive likelihood, [`simulate`] generates synthetic
//! leagues, and [`store`] handles game files and rating snapshots.

pub mod error;
pub mod game;
pub mod hyperopt;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod simulate;
pub mod store;
pub mod update;

pub use error::{Error, Result};
pub use game::{GameRecord, PlayerId};
pub use model::{Color, Hyperparameters, Outcome, OutcomeDistribution};
pub use update::{Belief, EngineConfig, RatingState};
