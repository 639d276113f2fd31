//! Reference computations written directly from the model formulas, kept
//! separate from the library code paths they check.

#![allow(dead_code)]

use drawrate_core::model::{Color, Hyperparameters, Outcome};
use drawrate_core::update::Belief;

/// Outcome probabilities by plain exponentiation (moderate strengths only).
pub fn naive_probs(ti: f64, tj: f64, x: f64, h: &Hyperparameters) -> [f64; 3] {
    let m = (ti + tj) / 2.0;
    let white = x * (h.alpha0 + h.alpha1 * m) / 4.0;
    let nw = (ti + white).exp();
    let nd = (h.beta0 + (1.0 + h.beta1) * m).exp();
    let nl = (tj - white).exp();
    let s = nw + nd + nl;
    [nw / s, nd / s, nl / s]
}

/// Like `naive_probs`, but the draw exponent's slope in the focal strength is
/// ½ around `pivot` (the score a draw is credited with when the override is on).
pub fn pseudo_probs(ti: f64, tj: f64, x: f64, h: &Hyperparameters, pivot: f64) -> [f64; 3] {
    let m = (ti + tj) / 2.0;
    let white = x * (h.alpha0 + h.alpha1 * m) / 4.0;
    let m_draw = (pivot + tj) / 2.0;
    let nw = (ti + white).exp();
    let nd = (h.beta0 + (1.0 + h.beta1) * m_draw + 0.5 * (ti - pivot)).exp();
    let nl = (tj - white).exp();
    let s = nw + nd + nl;
    [nw / s, nd / s, nl / s]
}

pub fn idx(o: Outcome) -> usize {
    match o {
        Outcome::Win => 0,
        Outcome::Draw => 1,
        Outcome::Loss => 2,
    }
}

pub fn sign(c: Color) -> f64 {
    match c {
        Color::White => 1.0,
        Color::Black => -1.0,
    }
}

/// Log of the two-node opponent average of the realized outcome's probability,
/// as a function of the focal strength.
pub fn log_u(
    theta: f64,
    opp: &Belief,
    outcome: Outcome,
    color: Color,
    h: &Hyperparameters,
    pseudo_pivot: Option<f64>,
) -> f64 {
    let k = idx(outcome);
    let p = |tj: f64| match pseudo_pivot {
        Some(pivot) => pseudo_probs(theta, tj, sign(color), h, pivot)[k],
        None => naive_probs(theta, tj, sign(color), h)[k],
    };
    (0.5 * (p(opp.mu - opp.sigma) + p(opp.mu + opp.sigma))).ln()
}

pub fn central1(f: impl Fn(f64) -> f64, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

pub fn central2(f: impl Fn(f64) -> f64, x: f64, step: f64) -> f64 {
    (f(x + step) - 2.0 * f(x) + f(x - step)) / (step * step)
}

/// Richardson-extrapolated central differences (fourth order).
pub fn deriv1(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let s = 1e-3;
    (4.0 * central1(&f, x, s / 2.0) - central1(&f, x, s)) / 3.0
}

pub fn deriv2(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let s = 2e-3;
    (4.0 * central2(&f, x, s / 2.0) - central2(&f, x, s)) / 3.0
}

/// Posterior mean and variance of the focal strength after one game, by
/// trapezoidal integration on an `n × n` grid over ±8 standard deviations.
pub fn grid_posterior(
    focal: &Belief,
    opp: &Belief,
    outcome: Outcome,
    color: Color,
    h: &Hyperparameters,
    n: usize,
) -> (f64, f64) {
    let axis = |b: &Belief| -> Vec<(f64, f64)> {
        let lo = b.mu - 8.0 * b.sigma;
        let step = 16.0 * b.sigma / (n - 1) as f64;
        (0..n)
            .map(|k| {
                let x = lo + step * k as f64;
                let trap = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                let dens = (-0.5 * ((x - b.mu) / b.sigma).powi(2)).exp();
                (x, trap * dens)
            })
            .collect()
    };
    let fi = axis(focal);
    let fj = axis(opp);
    let k = idx(outcome);
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for &(ti, wi) in &fi {
        let mut inner = 0.0;
        for &(tj, wj) in &fj {
            inner += wj * naive_probs(ti, tj, sign(color), h)[k];
        }
        let w = wi * inner;
        z += w;
        m1 += w * ti;
        m2 += w * ti * ti;
    }
    let mean = m1 / z;
    (mean, m2 / z - mean * mean)
}

/// Splitmix-style generator for test inputs, independent of the crate's RNG.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Standard normal by Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u = 1.0 - self.unit();
        let v = self.unit();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    /// Draws an outcome from win/draw/loss probabilities.
    pub fn sample(&mut self, p: [f64; 3]) -> Outcome {
        let u = self.unit();
        if u < p[0] {
            Outcome::Win
        } else if u < p[0] + p[1] {
            Outcome::Draw
        } else {
            Outcome::Loss
        }
    }

    pub fn outcome(&mut self) -> Outcome {
        Outcome::ALL[(self.next_u64() % 3) as usize]
    }

    pub fn color(&mut self) -> Color {
        if self.next_u64() & 1 == 0 {
            Color::White
        } else {
            Color::Black
        }
    }

    pub fn hyperparameters(&mut self) -> Hyperparameters {
        Hyperparameters {
            alpha0: self.uniform(-0.5, 0.5),
            alpha1: self.uniform(-0.3, 0.3),
            beta0: self.uniform(-1.0, 2.0),
            beta1: self.uniform(-0.3, 0.8),
            tau: self.uniform(0.0, 0.5),
        }
    }
}

/// A single game with both priors drawn by `prior` and the result sampled
/// from the model at strengths drawn from those priors.
pub fn realistic_game(
    rng: &mut SplitMix,
    h: &Hyperparameters,
    mut prior: impl FnMut(&mut SplitMix) -> Belief,
) -> drawrate_core::oracle::SingleGame {
    let focal = prior(rng);
    let opponent = prior(rng);
    let color = rng.color();
    let ti = focal.mu + focal.sigma * rng.normal();
    let tj = opponent.mu + opponent.sigma * rng.normal();
    let outcome = rng.sample(naive_probs(ti, tj, sign(color), h));
    drawrate_core::oracle::SingleGame { focal, opponent, outcome, color }
}

/// Belief-integrated predictions for every game after `train_until`, each
/// made against the priors in force before that period's games, paired with
/// the realized result (white's perspective).
pub fn validation_predictions(
    games: &[drawrate_core::GameRecord],
    periods: u32,
    h: &Hyperparameters,
    train_until: u32,
) -> Vec<([f64; 3], Outcome)> {
    use drawrate_core::hyperopt::{predictive_distribution, PeriodData, SCORING_ORDER};
    use drawrate_core::oracle::QuadratureRule;
    use drawrate_core::update::{run_period, EngineConfig, RatingState};

    let cfg = EngineConfig::default();
    let rule = QuadratureRule::gauss_hermite(SCORING_ORDER).unwrap();
    let data = PeriodData::with_span(games.iter().cloned(), 1, periods).unwrap();
    let mut state = RatingState::new(1);
    let mut out = Vec::new();
    for t in 1..=periods {
        if t > train_until {
            for g in data.games(t) {
                let w = state.belief_or_default(&g.white, &cfg);
                let b = state.belief_or_default(&g.black, &cfg);
                out.push((predictive_distribution(&w, &b, h, &rule).unwrap().as_array(), g.result));
            }
        }
        state = run_period(&state, data.games(t), h, &cfg).unwrap().state;
    }
    out
}

/// One probability bin: predictions in `[lo, lo + 0.1)`, how many, how many
/// hit, and the two-sided 99% binomial band for the hit count.
#[derive(Debug)]
pub struct CalibrationBin {
    pub outcome: Outcome,
    pub lo: f64,
    pub n: u64,
    pub hits: u64,
    pub band: (u64, u64),
}

impl CalibrationBin {
    pub fn ok(&self) -> bool {
        (self.band.0..=self.band.1).contains(&self.hits)
    }
}

/// Width-0.1 calibration bins for each outcome, keeping bins with at least
/// `min_n` predictions. The band uses the bin's mean prediction.
pub fn calibration_bins(rows: &[([f64; 3], Outcome)], min_n: u64) -> Vec<CalibrationBin> {
    use statrs::distribution::{Binomial, DiscreteCDF};
    let mut bins = Vec::new();
    for outcome in Outcome::ALL {
        let k = idx(outcome);
        for b in 0..10 {
            let lo = b as f64 / 10.0;
            let members: Vec<&([f64; 3], Outcome)> =
                rows.iter().filter(|(p, _)| ((p[k] * 10.0).floor() as usize).min(9) == b).collect();
            let n = members.len() as u64;
            if n < min_n {
                continue;
            }
            let mean = members.iter().map(|(p, _)| p[k]).sum::<f64>() / n as f64;
            let hits = members.iter().filter(|(_, o)| *o == outcome).count() as u64;
            let dist = Binomial::new(mean, n).unwrap();
            bins.push(CalibrationBin { outcome, lo, n, hits, band: (dist.inverse_cdf(0.005), dist.inverse_cdf(0.995)) });
        }
    }
    bins
}

/// Largest gap `F_a(x) − F_b(x)` between two empirical CDFs.
pub fn max_cdf_excess(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut worst: f64 = 0.0;
    for &x in a.iter().chain(&b) {
        let fa = a.partition_point(|v| *v <= x) as f64 / a.len() as f64;
        let fb = b.partition_point(|v| *v <= x) as f64 / b.len() as f64;
        worst = worst.max(fa - fb);
    }
    worst
}

/// One-sided two-sample Kolmogorov-Smirnov critical value.
pub fn ks_one_sided_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    (-(alpha.ln()) / 2.0 * (n + m) / (n * m)).sqrt()
}
