//! Hyperparameter selection by one-step-ahead predictive likelihood.
//!
//! Candidate hyperparameters drive the filter through a training span. Each
//! later period is first scored (log probability of every game's result,
//! integrating both players' current priors with a 3×3 Gauss-Hermite grid)
//! and only then used to update. The summed log-likelihood is maximized by
//! Nelder-Mead from several starts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::GameRecord;
use crate::model::{outcome_probabilities, Color, Hyperparameters, Outcome, OutcomeDistribution};
use crate::optim::{nelder_mead, NelderMeadSettings};
use crate::oracle::QuadratureRule;
use crate::update::{run_period, Belief, EngineConfig, RatingState};

/// Quadrature order used for predictive scoring.
pub const SCORING_ORDER: usize = 3;

/// Belief-integrated outcome probabilities for white against black.
pub fn predictive_distribution(
    white: &Belief,
    black: &Belief,
    h: &Hyperparameters,
    rule: &QuadratureRule,
) -> Result<OutcomeDistribution> {
    white.validate()?;
    black.validate()?;
    let mut acc = [0.0; 3];
    for (tw, ww) in rule.normal_points(white) {
        for (tb, wb) in rule.normal_points(black) {
            let p = outcome_probabilities(tw, tb, Color::White, h)?.as_array();
            for k in 0..3 {
                acc[k] += ww * wb * p[k];
            }
        }
    }
    Ok(OutcomeDistribution { win: acc[0], draw: acc[1], loss: acc[2] })
}

/// Probability of `outcome` (white's perspective) integrated over both priors.
pub fn game_predictive_likelihood(
    white: &Belief,
    black: &Belief,
    outcome: Outcome,
    h: &Hyperparameters,
    order: usize,
) -> Result<f64> {
    let rule = QuadratureRule::gauss_hermite(order)?;
    Ok(predictive_distribution(white, black, h, &rule)?.prob(outcome))
}

/// Games grouped by rating period over an explicit span.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodData {
    pub first: u32,
    pub last: u32,
    by_period: BTreeMap<u32, Vec<GameRecord>>,
}

impl PeriodData {
    /// Span runs from the earliest to the latest period present.
    pub fn from_games(games: impl IntoIterator<Item = GameRecord>) -> Result<Self> {
        let mut by_period: BTreeMap<u32, Vec<GameRecord>> = BTreeMap::new();
        for g in games {
            by_period.entry(g.period).or_default().push(g);
        }
        let first = *by_period.keys().next().ok_or_else(|| Error::invalid("no games"))?;
        let last = *by_period.keys().next_back().unwrap();
        Ok(PeriodData { first, last, by_period })
    }

    /// Explicit span; games outside it are an error.
    pub fn with_span(games: impl IntoIterator<Item = GameRecord>, first: u32, last: u32) -> Result<Self> {
        if first > last {
            return Err(Error::invalid(format!("empty span {first}..={last}")));
        }
        let mut by_period: BTreeMap<u32, Vec<GameRecord>> = BTreeMap::new();
        for g in games {
            if g.period < first || g.period > last {
                return Err(Error::invalid(format!("game in period {} outside {first}..={last}", g.period)));
            }
            by_period.entry(g.period).or_default().push(g);
        }
        Ok(PeriodData { first, last, by_period })
    }

    pub fn games(&self, period: u32) -> &[GameRecord] {
        self.by_period.get(&period).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.by_period.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveEvaluation {
    /// `(period, ℓ_t)` for every scored period.
    pub per_period: Vec<(u32, f64)>,
    pub total: f64,
    pub games_evaluated: usize,
}

fn score_period(
    state: &RatingState,
    games: &[GameRecord],
    h: &Hyperparameters,
    cfg: &EngineConfig,
    rule: &QuadratureRule,
) -> Result<(f64, usize)> {
    let logs: Vec<f64> = games
        .par_iter()
        .filter(|g| g.white != g.black)
        .map(|g| {
            let white = state.belief_or_default(&g.white, cfg);
            let black = state.belief_or_default(&g.black, cfg);
            Ok(predictive_distribution(&white, &black, h, rule)?.prob(g.result).ln())
        })
        .collect::<Result<_>>()?;
    Ok((logs.iter().sum(), logs.len()))
}

/// Filters through `train_until`, then scores each later period against the
/// priors in force before its games are seen.
pub fn evaluate_hyperparameters(
    data: &PeriodData,
    initial: &RatingState,
    h: &Hyperparameters,
    cfg: &EngineConfig,
    train_until: u32,
) -> Result<PredictiveEvaluation> {
    if train_until >= data.last {
        return Err(Error::invalid(format!(
            "no validation periods: train_until {train_until} >= last period {}",
            data.last
        )));
    }
    h.validate()?;
    let rule = QuadratureRule::gauss_hermite(SCORING_ORDER)?;
    let mut state = RatingState { period: data.first, players: initial.players.clone() };
    let mut per_period = Vec::new();
    let mut games_evaluated = 0;
    for t in data.first..=data.last {
        let games = data.games(t);
        if t > train_until {
            let (ell, n) = score_period(&state, games, h, cfg, &rule)?;
            per_period.push((t, ell));
            games_evaluated += n;
        }
        if t == data.last {
            break;
        }
        state = run_period(&state, games, h, cfg)?.state;
    }
    let total = per_period.iter().map(|(_, l)| l).sum();
    Ok(PredictiveEvaluation { per_period, total, games_evaluated })
}

/// Something to maximize over hyperparameters.
pub trait Objective: Sync {
    fn value(&self, h: &Hyperparameters) -> f64;
}

/// Total predictive log-likelihood; failed evaluations score `−∞`.
pub struct PredictiveObjective<'a> {
    pub data: &'a PeriodData,
    pub initial: &'a RatingState,
    pub cfg: &'a EngineConfig,
    pub train_until: u32,
}

impl Objective for PredictiveObjective<'_> {
    fn value(&self, h: &Hyperparameters) -> f64 {
        evaluate_hyperparameters(self.data, self.initial, h, self.cfg, self.train_until)
            .map(|e| e.total)
            .unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub simplex: NelderMeadSettings,
    /// Initial simplex steps for (α0, α1, β0, β1, ln τ).
    pub steps: [f64; 5],
    /// Hold α0 and α1 at their starting values.
    pub fix_alpha: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            simplex: NelderMeadSettings::default(),
            steps: [0.2, 0.2, 0.5, 0.2, 0.5],
            fix_alpha: true,
        }
    }
}

/// Starting points: both published tables and a neutral point.
pub fn default_starts() -> Vec<Hyperparameters> {
    vec![
        Hyperparameters::OPTIMIZED,
        Hyperparameters::QUASI_OPTIMIZED,
        Hyperparameters { alpha0: 0.0, alpha1: 0.0, beta0: 0.0, beta1: 0.0, tau: 0.2 },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartResult {
    pub initial: Hyperparameters,
    pub initial_objective: f64,
    pub converged_to: Hyperparameters,
    pub objective: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub start: usize,
    pub evaluation: usize,
    pub params: Hyperparameters,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best: Hyperparameters,
    pub objective: f64,
    pub starts: Vec<StartResult>,
    pub evaluations: usize,
    /// False when no start improved on its initial point.
    pub improved: bool,
    pub trace: Vec<TraceRow>,
}

impl OptimizationResult {
    /// Audit trail: start, evaluation, α0, α1, β0, β1, τ, objective.
    pub fn trace_delimited(&self, sep: char) -> String {
        let mut out = ["start", "evaluation", "alpha0", "alpha1", "beta0", "beta1", "tau", "objective"]
            .join(&sep.to_string());
        out.push('\n');
        for r in &self.trace {
            let p = &r.params;
            let _ = writeln!(
                out,
                "{}{sep}{}{sep}{}{sep}{}{sep}{}{sep}{}{sep}{}{sep}{}",
                r.start, r.evaluation, p.alpha0, p.alpha1, p.beta0, p.beta1, p.tau, r.objective
            );
        }
        out
    }
}

fn encode(h: &Hyperparameters, fix_alpha: bool) -> Vec<f64> {
    if fix_alpha {
        vec![h.beta0, h.beta1, h.tau.ln()]
    } else {
        vec![h.alpha0, h.alpha1, h.beta0, h.beta1, h.tau.ln()]
    }
}

fn decode(x: &[f64], base: &Hyperparameters, fix_alpha: bool) -> Hyperparameters {
    if fix_alpha {
        Hyperparameters { alpha0: base.alpha0, alpha1: base.alpha1, beta0: x[0], beta1: x[1], tau: x[2].exp() }
    } else {
        Hyperparameters { alpha0: x[0], alpha1: x[1], beta0: x[2], beta1: x[3], tau: x[4].exp() }
    }
}

fn params_key(h: &Hyperparameters) -> [f64; 5] {
    [h.alpha0, h.alpha1, h.beta0, h.beta1, h.tau]
}

/// Maximizes `objective` from each start (in parallel) and keeps the best.
pub fn optimize_objective<O: Objective>(
    objective: &O,
    starts: &[Hyperparameters],
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    if starts.is_empty() {
        return Err(Error::invalid("at least one start is required"));
    }
    for s in starts {
        s.validate()?;
        if s.tau <= 0.0 {
            return Err(Error::invalid("starting tau must be positive (searched on log scale)"));
        }
    }
    let steps: Vec<f64> = if settings.fix_alpha { settings.steps[2..].to_vec() } else { settings.steps.to_vec() };

    let runs: Vec<(StartResult, Vec<TraceRow>)> = starts
        .par_iter()
        .enumerate()
        .map(|(index, start)| {
            let mut trace = Vec::new();
            let x0 = encode(start, settings.fix_alpha);
            let m = nelder_mead(
                |x| {
                    let h = decode(x, start, settings.fix_alpha);
                    let v = objective.value(&h);
                    trace.push(TraceRow { start: index, evaluation: trace.len(), params: h, objective: v });
                    -v
                },
                &x0,
                &steps,
                &settings.simplex,
            );
            let initial_objective = trace[0].objective;
            let result = StartResult {
                initial: *start,
                initial_objective,
                converged_to: decode(&m.x, start, settings.fix_alpha),
                objective: -m.value,
                evaluations: m.evaluations,
                converged: m.converged,
            };
            (result, trace)
        })
        .collect();

    let best = runs
        .iter()
        .map(|(r, _)| r)
        .max_by(|a, b| {
            a.objective
                .total_cmp(&b.objective)
                .then_with(|| {
                    // order-independent tie break
                    let (ka, kb) = (params_key(&a.converged_to), params_key(&b.converged_to));
                    kb.iter().zip(&ka).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
                })
        })
        .unwrap()
        .clone();
    let improved = runs.iter().any(|(r, _)| r.objective > r.initial_objective);
    let evaluations = runs.iter().map(|(r, _)| r.evaluations).sum();
    let (starts, traces): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    Ok(OptimizationResult {
        best: best.converged_to,
        objective: best.objective,
        starts,
        evaluations,
        improved,
        trace: traces.into_iter().flatten().collect(),
    })
}

/// Predictive-likelihood optimization over the given data.
pub fn optimize(
    data: &PeriodData,
    initial: &RatingState,
    cfg: &EngineConfig,
    train_until: u32,
    starts: &[Hyperparameters],
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    if train_until >= data.last {
        return Err(Error::invalid("no validation periods after train_until"));
    }
    let objective = PredictiveObjective { data, initial, cfg, train_until };
    optimize_objective(&objective, starts, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const T2: Hyperparameters = Hyperparameters::QUASI_OPTIMIZED;

    #[test]
    fn point_masses_reduce_to_model_probabilities() {
        let w = Belief { mu: 0.7, sigma: 1e-8 };
        let b = Belief { mu: -0.2, sigma: 1e-8 };
        let p = outcome_probabilities(0.7, -0.2, Color::White, &T2).unwrap();
        for o in Outcome::ALL {
            let l = game_predictive_likelihood(&w, &b, o, &T2, 3).unwrap();
            assert_abs_diff_eq!(l, p.prob(o), epsilon = 1e-6);
        }
        let e = Belief { mu: 0.0, sigma: 1e-8 };
        assert_abs_diff_eq!(game_predictive_likelihood(&e, &e, Outcome::Draw, &T2, 3).unwrap(), 0.600, epsilon = 1e-3);
    }

    #[test]
    fn diffuse_beliefs_agree_with_higher_order() {
        let w = Belief { mu: 1.0, sigma: 1.0 };
        let b = Belief { mu: 0.5, sigma: 1.0 };
        let mut sum = 0.0;
        for o in Outcome::ALL {
            let l3 = game_predictive_likelihood(&w, &b, o, &T2, 3).unwrap();
            let l9 = game_predictive_likelihood(&w, &b, o, &T2, 9).unwrap();
            assert_abs_diff_eq!(l3, l9, epsilon = 1e-3);
            sum += l3;
        }
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn empty_validation_period_scores_zero() {
        let games = vec![GameRecord::new(1, "a", "b", Outcome::Win)];
        let data = PeriodData::with_span(games, 1, 2).unwrap();
        let e = evaluate_hyperparameters(&data, &RatingState::default(), &T2, &EngineConfig::default(), 1).unwrap();
        assert_eq!(e.total, 0.0);
        assert_eq!(e.games_evaluated, 0);
        assert_eq!(e.per_period, vec![(2, 0.0)]);
    }

    #[test]
    fn no_validation_span_is_rejected() {
        let games = vec![GameRecord::new(1, "a", "b", Outcome::Win)];
        let data = PeriodData::from_games(games).unwrap();
        assert!(evaluate_hyperparameters(&data, &RatingState::default(), &T2, &EngineConfig::default(), 1).is_err());
    }

    struct Quadratic;
    impl Objective for Quadratic {
        fn value(&self, h: &Hyperparameters) -> f64 {
            -(h.beta0 - 0.8).powi(2) - 2.0 * (h.beta1 - 0.3).powi(2) - (h.tau.ln() - 0.25f64.ln()).powi(2)
        }
    }

    #[test]
    fn recovers_quadratic_maximizer() {
        let settings = OptimizerSettings {
            simplex: NelderMeadSettings { spread_tol: 1e-14, max_evals: 2000 },
            ..Default::default()
        };
        let r = optimize_objective(&Quadratic, &default_starts(), &settings).unwrap();
        assert!(r.improved);
        assert_abs_diff_eq!(r.best.beta0, 0.8, epsilon = 1e-4);
        assert_abs_diff_eq!(r.best.beta1, 0.3, epsilon = 1e-4);
        assert_abs_diff_eq!(r.best.tau, 0.25, epsilon = 1e-4);
        assert!(r.starts.iter().all(|s| s.objective <= r.objective));
        assert_eq!(r.trace.len(), r.evaluations);
    }

    #[test]
    fn start_order_does_not_matter() {
        let settings = OptimizerSettings::default();
        let starts = default_starts();
        let mut reversed = starts.clone();
        reversed.reverse();
        let a = optimize_objective(&Quadratic, &starts, &settings).unwrap();
        let b = optimize_objective(&Quadratic, &reversed, &settings).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn rejects_bad_starts() {
        let settings = OptimizerSettings::default();
        assert!(optimize_objective(&Quadratic, &[], &settings).is_err());
        let zero_tau = Hyperparameters { tau: 0.0, ..T2 };
        assert!(optimize_objective(&Quadratic, &[zero_tau], &settings).is_err());
    }

    #[test]
    fn stationary_start_reports_no_improvement() {
        struct Flat;
        impl Objective for Flat {
            fn value(&self, _: &Hyperparameters) -> f64 {
                -1.0
            }
        }
        let r = optimize_objective(&Flat, &[T2], &OptimizerSettings::default()).unwrap();
        assert!(!r.improved);
        assert_eq!(r.best, T2);
    }
}
