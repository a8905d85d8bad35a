//! Counting by simulated annealing.
//!
//! For a partition function `Z(λ) = Σ_k c_k λ^k` with `c_k ≥ 0`, a state drawn
//! at activity `hi` gives the unbiased ratio estimate
//! `E_hi[(lo/hi)^{|X|}] = Z(lo)/Z(hi)`, which also works at `lo = 0`. Telescoping
//! over a ladder `0 = λ₀ < λ₁ < … < λ_r = λ` gives `Z(λ)/Z(0)`.
//!
//! Sample sizes come from Chebyshev's inequality applied to the product of rung
//! means, boosted to the requested confidence by a median over independent
//! groups.

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::ChainRng;

/// A positive quantity stored as its logarithm with an error radius and the
/// probability that the radius is exceeded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEstimate {
    pub log_value: f64,
    pub eps: f64,
    pub delta: f64,
}

impl LogEstimate {
    pub fn exact(log_value: f64) -> Self {
        Self {
            log_value,
            eps: 0.0,
            delta: 0.0,
        }
    }

    /// Whether `log_truth` lies in the interval, up to floating-point rounding.
    pub fn contains(&self, log_truth: f64) -> bool {
        let slack = 1e-12 * log_truth.abs().max(1.0);
        (self.log_value - log_truth).abs() <= self.eps + slack
    }

    /// Estimate of a product: logs add, radii add, failure probabilities
    /// combine by the union bound.
    pub fn product(&self, other: &LogEstimate) -> LogEstimate {
        LogEstimate {
            log_value: self.log_value + other.log_value,
            eps: self.eps + other.eps,
            delta: (self.delta + other.delta).min(1.0),
        }
    }
}

/// A Markov chain targeting `∝ c_k λ^k` for any activity on the ladder.
pub trait AnnealChain: Sync {
    type State: Clone + Send;

    fn start(&self) -> Self::State;

    fn advance(&self, state: &mut Self::State, lambda: f64, steps: u64, rng: &mut ChainRng);

    /// Steps needed from any start to come within `tv` of stationarity.
    fn mixing_steps(&self, lambda: f64, tv: f64) -> u64;

    /// Steps between retained samples.
    fn thin_steps(&self, lambda: f64, tv: f64) -> u64 {
        self.mixing_steps(lambda, tv)
    }

    /// Unbiased estimate of `Z(lo)/Z(hi)` in `[0, 1]` from a state at `hi`.
    fn ratio(&self, state: &Self::State, lo: f64, hi: f64) -> f64;

    /// Largest power of `λ` in `Z`, which sets the ladder spacing.
    fn degree(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub eps: f64,
    pub delta: f64,
    /// Samples used to estimate each rung's relative variance.
    pub pilot: usize,
    /// Multiplier on the pilot relative variance.
    pub safety: f64,
    /// A rung is split when its pilot relative variance exceeds this.
    pub max_relvar: f64,
    pub max_rungs: usize,
    /// Share of `eps` reserved for the bias of imperfect mixing.
    pub bias_share: f64,
}

impl AnnealConfig {
    pub fn new(eps: f64, delta: f64) -> Self {
        Self {
            eps,
            delta,
            pilot: 400,
            safety: 1.5,
            max_relvar: 3.0,
            max_rungs: 4096,
            bias_share: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealReport {
    pub estimate: LogEstimate,
    pub ladder: Vec<f64>,
    pub pilot_relvar: Vec<f64>,
    pub samples_per_rung: Vec<usize>,
    pub groups: usize,
    pub group_failure: f64,
    pub group_logs: Vec<f64>,
}

/// `P(Bin(m, q) ≥ (m+1)/2)`.
fn majority_failure(m: usize, q: f64) -> f64 {
    let need = m.div_ceil(2);
    let mut total = 0.0;
    let mut coef = 1.0f64;
    for k in 0..=m {
        if k > 0 {
            coef *= (m - k + 1) as f64 / k as f64;
        }
        if k >= need {
            total += coef * q.powi(k as i32) * (1.0 - q).powi((m - k) as i32);
        }
    }
    total
}

/// Odd group count `m` and per-group failure `q` with `P(median fails) ≤ delta`,
/// chosen to minimize total samples `∝ m / ln(1 + q·eps'²)`.
pub fn median_plan(delta: f64, eps_rel: f64) -> (usize, f64) {
    let mut best = (1, delta.min(0.5), f64::INFINITY);
    for m in (1..=201).step_by(2) {
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if majority_failure(m, mid) <= delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo <= 0.0 {
            continue;
        }
        let cost = m as f64 / (1.0 + lo * eps_rel * eps_rel).ln();
        if cost < best.2 {
            best = (m, lo, cost);
        }
    }
    (best.0, best.1)
}

/// Next activity after `lo` so that for `Z = (1+λ)^m` the rung's relative
/// variance is about one.
fn next_rung(lo: f64, m: usize, target: f64) -> f64 {
    let m = m.max(1) as f64;
    if lo == 0.0 {
        // relvar of the indicator of size zero is Z(hi) − 1
        return (2f64.ln() / m).exp_m1();
    }
    let f = |hi: f64| {
        m * ((lo * lo / hi).ln_1p() + hi.ln_1p() - 2.0 * lo.ln_1p())
    };
    let goal = 2f64.ln();
    let mut hi = lo * 2.0;
    while f(hi) < goal && hi < target {
        hi *= 2.0;
    }
    if hi >= target && f(target) <= goal {
        return target;
    }
    let (mut a, mut b) = (lo, hi.min(target));
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if f(mid) <= goal {
            a = mid;
        } else {
            b = mid;
        }
    }
    a.max(lo * (1.0 + 1e-9))
}

struct Rung {
    lo: f64,
    hi: f64,
    relvar: f64,
}

fn collect<C: AnnealChain>(
    chain: &C,
    state: &mut C::State,
    lo: f64,
    hi: f64,
    count: usize,
    burn: u64,
    thin: u64,
    rng: &mut ChainRng,
) -> (f64, f64) {
    chain.advance(state, hi, burn, rng);
    let mut sum = 0.0;
    let mut sq = 0.0;
    for k in 0..count {
        if k > 0 {
            chain.advance(state, hi, thin, rng);
        }
        let w = chain.ratio(state, lo, hi);
        sum += w;
        sq += w * w;
    }
    (sum, sq)
}

/// Estimates `ln Z(λ) − ln Z(0)`.
pub fn anneal<C: AnnealChain, R: Rng + ?Sized>(
    chain: &C,
    lambda: f64,
    cfg: &AnnealConfig,
    rng: &mut R,
) -> AnnealReport {
    assert!(lambda >= 0.0);
    if lambda == 0.0 || chain.degree() == 0 {
        return AnnealReport {
            estimate: LogEstimate::exact(0.0),
            ladder: vec![0.0],
            pilot_relvar: vec![],
            samples_per_rung: vec![],
            groups: 0,
            group_failure: 0.0,
            group_logs: vec![],
        };
    }
    let m = chain.degree();
    // statistical error gets (1 − bias_share)·eps, mixing bias the rest
    let eps_stat = cfg.eps * (1.0 - cfg.bias_share);
    let eps_rel = 1.0 - (-eps_stat).exp();

    // ladder from the product proxy, then checked and refined by pilot runs
    let mut proposed = vec![0.0];
    while *proposed.last().unwrap() < lambda && proposed.len() < cfg.max_rungs {
        let lo = *proposed.last().unwrap();
        proposed.push(next_rung(lo, m, lambda).min(lambda));
    }
    if *proposed.last().unwrap() < lambda {
        proposed.push(lambda);
    }
    let r_guess = proposed.len() - 1;
    let tv = cfg.eps * cfg.bias_share / (4.0 * r_guess.max(1) as f64);

    let mut pilot_rng = ChainRng::seed_from_u64(rng.gen());
    let mut pilot_state = chain.start();
    let mut rungs: Vec<Rung> = Vec::new();
    let mut stack: Vec<(f64, f64)> = proposed.windows(2).rev().map(|w| (w[0], w[1])).collect();
    while let Some((lo, hi)) = stack.pop() {
        let burn = chain.mixing_steps(hi, tv);
        let thin = chain.thin_steps(hi, tv);
        let (sum, sq) = collect(chain, &mut pilot_state, lo, hi, cfg.pilot, burn, thin, &mut pilot_rng);
        let mean = sum / cfg.pilot as f64;
        let relvar = if mean > 0.0 {
            (sq / cfg.pilot as f64) / (mean * mean) - 1.0
        } else {
            f64::INFINITY
        };
        let splittable = hi - lo > 1e-12 * hi.max(1e-300) && rungs.len() + stack.len() < cfg.max_rungs;
        if relvar > cfg.max_relvar && splittable {
            let mid = if lo == 0.0 { hi / 2.0 } else { (lo * hi).sqrt() };
            stack.push((mid, hi));
            stack.push((lo, mid));
        } else {
            rungs.push(Rung {
                lo,
                hi,
                relvar: relvar.max(0.0),
            });
        }
    }

    let r = rungs.len();
    let tv = cfg.eps * cfg.bias_share / (4.0 * r as f64);
    let (groups, q) = median_plan(cfg.delta, eps_rel);
    let budget = (1.0 + q * eps_rel * eps_rel).ln();
    let samples: Vec<usize> = rungs
        .iter()
        .map(|rg| {
            let v = (rg.relvar * cfg.safety).max(1e-3);
            ((r as f64 * v / budget).ceil() as usize).max(2)
        })
        .collect();

    let seeds: Vec<u64> = (0..groups).map(|_| rng.gen()).collect();
    let group_logs: Vec<f64> = seeds
        .par_iter()
        .map(|&seed| {
            let mut grng = ChainRng::seed_from_u64(seed);
            let mut state = chain.start();
            let mut log_ratio = 0.0;
            for (rg, &s) in rungs.iter().zip(&samples) {
                let burn = chain.mixing_steps(rg.hi, tv);
                let thin = chain.thin_steps(rg.hi, tv);
                let (sum, _) = collect(chain, &mut state, rg.lo, rg.hi, s, burn, thin, &mut grng);
                log_ratio -= (sum / s as f64).ln();
            }
            log_ratio
        })
        .collect();
    let ladder = std::iter::once(0.0).chain(rungs.iter().map(|r| r.hi)).collect();
    let mut sorted = group_logs.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    AnnealReport {
        estimate: LogEstimate {
            log_value: median,
            eps: cfg.eps,
            delta: cfg.delta,
        },
        ladder,
        pilot_relvar: rungs.iter().map(|r| r.relvar).collect(),
        samples_per_rung: samples,
        groups,
        group_failure: q,
        group_logs,
    }
}
