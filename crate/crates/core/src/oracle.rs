//! Reference single-game posteriors by nested Gauss-Hermite quadrature.
//!
//! The posterior mean and variance of the focal strength after one game are
//! ratios of double integrals over both players' normal priors. Here both
//! integrals are evaluated with an R-point Gauss-Hermite rule (R = 9 by
//! default), which is accurate enough to serve as ground truth for the
//! closed-form update in [`crate::update`]. This path is never used to rate
//! players.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{log_outcome_probabilities, Color, Hyperparameters, Outcome};
use crate::update::{game_term, period_update, Belief, EngineConfig};

pub const MAX_ORDER: usize = 50;
pub const DEFAULT_ORDER: usize = 9;

/// Nodes and weights for `∫ f(z) e^{-z²} dz ≈ Σ w_r f(z_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Orthonormal Hermite values ψ_{n-1}(z), ψ_n(z) for weight e^{-z²}.
fn hermite_pair(n: usize, z: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    for k in 0..n {
        let next = (2.0 / (k + 1) as f64).sqrt() * z * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (prev, cur)
}

impl QuadratureRule {
    /// Gauss-Hermite rule of the given order (1 ..= 50).
    ///
    /// Nodes start from the eigenvalues of the Jacobi matrix (Golub-Welsch)
    /// and are polished by Newton steps on the three-term recurrence; the
    /// weights are `1 / (R ψ_{R-1}(z)²)` with ψ orthonormal.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::invalid(format!("quadrature order must be in 1..={MAX_ORDER}, got {order}")));
        }
        let jacobi = DMatrix::from_fn(order, order, |r, c| {
            if r + 1 == c || c + 1 == r {
                (r.max(c) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(f64::total_cmp);

        for z in nodes.iter_mut() {
            for _ in 0..3 {
                let (lower, top) = hermite_pair(order, *z);
                let slope = (2.0 * order as f64).sqrt() * lower;
                if slope == 0.0 {
                    break;
                }
                *z -= top / slope;
            }
        }
        // exact symmetry about zero
        for r in 0..order / 2 {
            let m = 0.5 * (nodes[order - 1 - r] - nodes[r]);
            nodes[r] = -m;
            nodes[order - 1 - r] = m;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }

        let weights = nodes
            .iter()
            .map(|&z| {
                let (lower, _) = hermite_pair(order, z);
                1.0 / (order as f64 * lower * lower)
            })
            .collect();
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `∫ f(z) e^{-z²} dz`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }

    /// Points `μ + √2 σ z_r` and probability weights `w_r / √π` for
    /// expectations under `N(μ, σ²)`.
    pub fn normal_points(&self, belief: &Belief) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (mu, scale) = (belief.mu, std::f64::consts::SQRT_2 * belief.sigma);
        let norm = PI.sqrt().recip();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&z, &w)| (mu + scale * z, w * norm))
    }
}

/// Posterior mean and variance of the focal strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OraclePosterior {
    pub mean: f64,
    pub variance: f64,
    /// Log of the normalizing double integral (the marginal probability of
    /// the observed result).
    pub log_evidence: f64,
}

impl OraclePosterior {
    pub fn belief(&self) -> Belief {
        Belief { mu: self.mean, sigma: self.variance.sqrt() }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Posterior moments of the focal strength for an arbitrary log-likelihood
/// `log_lik(θ_focal, θ_opponent)`, both priors integrated by `rule`.
pub fn quadrature_posterior(
    focal: &Belief,
    opponent: &Belief,
    rule: &QuadratureRule,
    log_lik: impl Fn(f64, f64) -> Result<f64>,
) -> Result<OraclePosterior> {
    focal.validate()?;
    opponent.validate()?;
    let outer: Vec<(f64, f64)> = rule.normal_points(focal).collect();
    let inner: Vec<(f64, f64)> = rule.normal_points(opponent).collect();

    // log(w_s I_j(θ_s)) for every focal node
    let mut log_mass = Vec::with_capacity(outer.len());
    for &(theta_i, w_s) in &outer {
        let terms = inner
            .iter()
            .map(|&(theta_j, w_r)| Ok(w_r.ln() + log_lik(theta_i, theta_j)?))
            .collect::<Result<Vec<f64>>>()?;
        log_mass.push(w_s.ln() + log_sum_exp(terms.into_iter()));
    }
    let log_evidence = log_sum_exp(log_mass.iter().copied());
    if !log_evidence.is_finite() {
        return Err(Error::degenerate("observed result has zero probability at every node pair"));
    }
    let mass: Vec<f64> = log_mass.iter().map(|l| (l - log_evidence).exp()).collect();
    let mean: f64 = outer.iter().zip(&mass).map(|(&(t, _), m)| m * t).sum();
    // E(θ²) − E(θ)², accumulated about the mean
    let variance: f64 = outer.iter().zip(&mass).map(|(&(t, _), m)| m * (t - mean).powi(2)).sum();
    if !(variance > 0.0) {
        return Err(Error::degenerate(format!("oracle posterior variance {variance}")));
    }
    Ok(OraclePosterior { mean, variance, log_evidence })
}

/// Reference posterior for the focal player after one game.
pub fn oracle_posterior(
    focal: &Belief,
    opponent: &Belief,
    outcome: Outcome,
    color: Color,
    h: &Hyperparameters,
    order: usize,
) -> Result<OraclePosterior> {
    if order < 2 {
        return Err(Error::invalid(format!("oracle order must be >= 2, got {order}")));
    }
    let rule = QuadratureRule::gauss_hermite(order)?;
    let k = outcome_index(outcome);
    quadrature_posterior(focal, opponent, &rule, |ti, tj| {
        Ok(log_outcome_probabilities(ti, tj, color, h)?[k])
    })
}

fn outcome_index(outcome: Outcome) -> usize {
    Outcome::ALL.iter().position(|o| *o == outcome).unwrap()
}

/// One game for a single-game comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleGame {
    pub focal: Belief,
    pub opponent: Belief,
    pub outcome: Outcome,
    pub color: Color,
}

/// Approximate and reference posteriors for one game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdatePair {
    pub prior: Belief,
    pub outcome: Outcome,
    pub approx: Belief,
    pub exact: Belief,
}

impl UpdatePair {
    pub fn approx_shift(&self) -> f64 {
        self.approx.mu - self.prior.mu
    }

    pub fn exact_shift(&self) -> f64 {
        self.exact.mu - self.prior.mu
    }

    fn approx_log_sd_change(&self) -> f64 {
        (self.approx.sigma / self.prior.sigma).ln()
    }

    fn exact_log_sd_change(&self) -> f64 {
        (self.exact.sigma / self.prior.sigma).ln()
    }
}

/// One summary line of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub subset: String,
    pub n: usize,
    /// Mean |posterior − prior mean| under the closed-form update.
    pub mean_abs_approx: f64,
    /// Same under the quadrature reference.
    pub mean_abs_exact: f64,
    /// R² of approximate against reference mean changes, about y = x.
    pub r2_mean: f64,
    pub mean_abs_diff: f64,
    /// R² of the log standard deviation changes, about y = x.
    pub r2_log_sd: f64,
}

/// Coefficient of determination of `y` against the identity line `y = x`.
pub fn r2_identity(x: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean_y = y.iter().sum::<f64>() / n;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - mean_y).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

impl ComparisonRow {
    pub fn from_pairs(subset: impl Into<String>, pairs: &[&UpdatePair]) -> Self {
        let n = pairs.len();
        let nf = n as f64;
        let approx: Vec<f64> = pairs.iter().map(|p| p.approx_shift()).collect();
        let exact: Vec<f64> = pairs.iter().map(|p| p.exact_shift()).collect();
        let approx_sd: Vec<f64> = pairs.iter().map(|p| p.approx_log_sd_change()).collect();
        let exact_sd: Vec<f64> = pairs.iter().map(|p| p.exact_log_sd_change()).collect();
        ComparisonRow {
            subset: subset.into(),
            n,
            mean_abs_approx: approx.iter().map(|v| v.abs()).sum::<f64>() / nf,
            mean_abs_exact: exact.iter().map(|v| v.abs()).sum::<f64>() / nf,
            r2_mean: r2_identity(&exact, &approx),
            mean_abs_diff: approx.iter().zip(&exact).map(|(a, e)| (a - e).abs()).sum::<f64>() / nf,
            r2_log_sd: r2_identity(&exact_sd, &approx_sd),
        }
    }
}

/// Summary of closed-form versus quadrature single-game updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub pairs: Vec<UpdatePair>,
    /// Games whose update failed, with the reason.
    pub excluded: Vec<(usize, String)>,
}

impl ComparisonReport {
    /// Builds the summary rows. With `stratify`, adds decisive/drawn splits
    /// and the same splits within terciles of the focal prior mean.
    pub fn from_pairs(pairs: Vec<UpdatePair>, excluded: Vec<(usize, String)>, stratify: bool) -> Self {
        let mut rows = Vec::new();
        let all: Vec<&UpdatePair> = pairs.iter().collect();
        if !all.is_empty() {
            push_outcome_rows(&mut rows, "All games", &all, stratify);
        }
        if stratify && all.len() >= 3 {
            let mut mus: Vec<f64> = all.iter().map(|p| p.prior.mu).collect();
            mus.sort_by(f64::total_cmp);
            let lo = mus[(mus.len() - 1) / 3];
            let hi = mus[2 * (mus.len() - 1) / 3];
            let bands: [(String, Box<dyn Fn(f64) -> bool>); 3] = [
                (format!("mu > {hi:.2}"), Box::new(move |m| m > hi)),
                (format!("{lo:.2} < mu <= {hi:.2}"), Box::new(move |m| m > lo && m <= hi)),
                (format!("mu <= {lo:.2}"), Box::new(move |m| m <= lo)),
            ];
            for (label, keep) in bands.iter() {
                let subset: Vec<&UpdatePair> = all.iter().copied().filter(|p| keep(p.prior.mu)).collect();
                if !subset.is_empty() {
                    push_outcome_rows(&mut rows, &format!("All games, {label}"), &subset, true);
                }
            }
        }
        ComparisonReport { rows, pairs, excluded }
    }

    /// Delimited table: subset, N, Δ_approx, Δ_GH, R²(mean), |Δ_approx − Δ_GH|, R²(log sd).
    pub fn to_delimited(&self, sep: char) -> String {
        let mut out = String::new();
        let header = ["subset", "n", "delta_approx", "delta_gh", "r2_mean", "abs_diff", "r2_log_sd"];
        out.push_str(&header.join(&sep.to_string()));
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}{sep}{}{sep}{:.6}{sep}{:.6}{sep}{:.6}{sep}{:.6}{sep}{:.6}",
                r.subset, r.n, r.mean_abs_approx, r.mean_abs_exact, r.r2_mean, r.mean_abs_diff, r.r2_log_sd
            );
        }
        out
    }
}

fn push_outcome_rows(rows: &mut Vec<ComparisonRow>, label: &str, pairs: &[&UpdatePair], split: bool) {
    rows.push(ComparisonRow::from_pairs(label, pairs));
    if !split {
        return;
    }
    let decisive: Vec<&UpdatePair> = pairs.iter().copied().filter(|p| p.outcome.is_decisive()).collect();
    let drawn: Vec<&UpdatePair> = pairs.iter().copied().filter(|p| !p.outcome.is_decisive()).collect();
    let stem = label.trim_start_matches("All games");
    if !decisive.is_empty() {
        rows.push(ComparisonRow::from_pairs(format!("Decisive games{stem}"), &decisive));
    }
    if !drawn.is_empty() {
        rows.push(ComparisonRow::from_pairs(format!("Drawn games{stem}"), &drawn));
    }
}

/// Runs both update routes on every game and summarizes the differences.
pub fn compare_updates(
    games: &[SingleGame],
    h: &Hyperparameters,
    cfg: &EngineConfig,
    order: usize,
    stratify: bool,
) -> Result<ComparisonReport> {
    if games.is_empty() {
        return Err(Error::invalid("comparison needs at least one game"));
    }
    let rule = QuadratureRule::gauss_hermite(order)?;
    let results: Vec<Result<UpdatePair>> = games
        .par_iter()
        .map(|g| {
            let term = game_term(&g.focal, &g.opponent, g.outcome, g.color, h, cfg)?;
            let approx = period_update(&g.focal, &[term])?;
            let k = outcome_index(g.outcome);
            let exact = quadrature_posterior(&g.focal, &g.opponent, &rule, |ti, tj| {
                Ok(log_outcome_probabilities(ti, tj, g.color, h)?[k])
            })?;
            Ok(UpdatePair { prior: g.focal, outcome: g.outcome, approx, exact: exact.belief() })
        })
        .collect();
    let mut pairs = Vec::new();
    let mut excluded = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => pairs.push(p),
            Err(e) => excluded.push((i, e.to_string())),
        }
    }
    Ok(ComparisonReport::from_pairs(pairs, excluded, stratify))
}
