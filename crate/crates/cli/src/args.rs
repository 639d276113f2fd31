use std::path::PathBuf;

use clap::{Args, ValueEnum};
use drawrate_core::{EngineConfig, Hyperparameters};

/// Hyperparameter overrides. Unset values fall back to the snapshot's, then
/// to the quasi-optimized defaults.
#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    /// White-advantage intercept
    #[arg(long, allow_hyphen_values = true)]
    pub alpha0: Option<f64>,
    /// White-advantage slope in mean strength
    #[arg(long, allow_hyphen_values = true)]
    pub alpha1: Option<f64>,
    /// Draw-propensity intercept
    #[arg(long, allow_hyphen_values = true)]
    pub beta0: Option<f64>,
    /// Draw-propensity slope in mean strength
    #[arg(long, allow_hyphen_values = true)]
    pub beta1: Option<f64>,
    /// Per-period innovation sd of latent strength
    #[arg(long)]
    pub tau: Option<f64>,
}

impl HyperArgs {
    pub fn resolve(&self, base: Hyperparameters) -> Hyperparameters {
        Hyperparameters {
            alpha0: self.alpha0.unwrap_or(base.alpha0),
            alpha1: self.alpha1.unwrap_or(base.alpha1),
            beta0: self.beta0.unwrap_or(base.beta0),
            beta1: self.beta1.unwrap_or(base.beta1),
            tau: self.tau.unwrap_or(base.tau),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// Deviation (latent units) at or above which the prior is carried forward unchanged
    #[arg(long)]
    pub sigma_cap: Option<f64>,
    /// Score draws with the model's own coefficient instead of ½
    #[arg(long)]
    pub no_draw_override: bool,
    /// Prior mean for unrated players, Elo scale
    #[arg(long)]
    pub default_mean_elo: Option<f64>,
    /// Prior sd for unrated players, Elo scale
    #[arg(long)]
    pub default_sd_elo: Option<f64>,
    /// Prior sd for players seeded from a ratings list, Elo scale
    #[arg(long)]
    pub rated_sd_elo: Option<f64>,
}

impl EngineArgs {
    pub fn resolve(&self, base: EngineConfig) -> EngineConfig {
        EngineConfig {
            sigma_cap: self.sigma_cap.unwrap_or(base.sigma_cap),
            draw_score_override: base.draw_score_override && !self.no_draw_override,
            default_mean_elo: self.default_mean_elo.unwrap_or(base.default_mean_elo),
            default_sd_elo: self.default_sd_elo.unwrap_or(base.default_sd_elo),
            rated_sd_elo: self.rated_sd_elo.unwrap_or(base.rated_sd_elo),
        }
    }
}

/// Where the starting ratings come from.
#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    /// Rating snapshot to start from
    #[arg(long, conflicts_with = "ratings")]
    pub snapshot: Option<PathBuf>,
    /// `player,elo` list used to seed priors when there is no snapshot
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// Period of the fresh state when no snapshot is given
    #[arg(long, default_value_t = 1)]
    pub period: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairingArg {
    Banded,
    Uniform,
}
