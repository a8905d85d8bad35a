//! Running the defect chain: sampling `ν_{A,B,λ}` and estimating `Zʷ_{A,B}(λ)`.

use std::collections::HashMap;
use std::sync::RwLock;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anneal::{anneal, AnnealChain, AnnealConfig, AnnealReport, LogEstimate};
use crate::error::{Error, Result};
use crate::graph::EdgeId;
use crate::hardcore::hc_sample;
use crate::partition::Partition;
use crate::poly::Polynomial;
use crate::rng::ChainRng;

use super::marginal::marginal_hat;
use super::product::ProductFactors;
use super::{DefectState, HighDensityConfig};

type MarginalKey = (u64, u32, u64);

/// The defect chain for one partition, with memoized marginals on small `n`.
pub struct DefectSampler {
    cfg: HighDensityConfig,
    part: Partition,
    cap: usize,
    pairs: Vec<EdgeId>,
    step_eps: f64,
    step_delta: f64,
    cache: Option<RwLock<HashMap<MarginalKey, f64>>>,
}

impl DefectSampler {
    /// Per-step marginal budgets `(step_eps, step_delta)` are given directly.
    pub fn new(part: Partition, cfg: HighDensityConfig, step_eps: f64, step_delta: f64) -> Result<Self> {
        cfg.validate()?;
        if part.n() != cfg.n {
            return Err(Error::contract("partition size differs from n"));
        }
        if !part.is_weakly_balanced() {
            warn!("partition {:?} is not weakly balanced", part.sizes());
        }
        if !cfg.in_regime() {
            warn!(
                "λ = {} is below C/√n = {}",
                cfg.lambda,
                cfg.regime_c / (cfg.n as f64).sqrt()
            );
        }
        let cap = cfg.cap();
        let pairs = part.intra_pairs();
        let cache = (cfg.n * (cfg.n - 1) / 2 <= 64).then(|| RwLock::new(HashMap::new()));
        Ok(Self {
            cfg,
            part,
            cap,
            pairs,
            step_eps,
            step_delta,
            cache,
        })
    }

    /// Budgets `ε′ = ε/T`, `δ′ = 1/T` for a run of `T = K n² ln(n/ε)` steps,
    /// unless the config overrides them.
    pub fn for_accuracy(part: Partition, cfg: HighDensityConfig, eps: f64) -> Result<Self> {
        let t = cfg.burn_in_steps(eps).max(1) as f64;
        let step_eps = cfg.step_eps.unwrap_or(eps / t);
        let step_delta = cfg.step_delta.unwrap_or(1.0 / t);
        Self::new(part, cfg, step_eps, step_delta)
    }

    pub fn config(&self) -> &HighDensityConfig {
        &self.cfg
    }

    pub fn partition(&self) -> &Partition {
        &self.part
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn pairs(&self) -> &[EdgeId] {
        &self.pairs
    }

    pub fn start(&self) -> DefectState {
        DefectState::new(self.part.clone(), self.cap)
    }

    /// `p̂(pairs[idx] | state)`; the pair must be absent from `state`.
    pub fn marginal<R: Rng + ?Sized>(
        &self,
        state: &DefectState,
        idx: usize,
        lambda: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let e = self.pairs[idx];
        if !state.can_add(e) {
            return Ok(0.0);
        }
        let key = state.key().map(|k| (k, idx as u32, lambda.to_bits()));
        if let (Some(cache), Some(key)) = (&self.cache, key) {
            if let Some(&p) = cache.read().expect("marginal cache").get(&key) {
                return Ok(p);
            }
        }
        let m = marginal_hat(state, e, lambda, &self.cfg, self.step_eps, self.step_delta, rng)?;
        if let (Some(cache), Some(key), true) = (&self.cache, key, m.is_reproducible()) {
            cache.write().expect("marginal cache").insert(key, m.p);
        }
        Ok(m.p)
    }

    /// One update: a uniform intra-part pair is present afterwards iff
    /// `U < p̂(e | rest)`.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut DefectState, lambda: f64, rng: &mut R) -> Result<()> {
        if self.pairs.is_empty() {
            return Ok(());
        }
        let idx = rng.gen_range(0..self.pairs.len());
        let u: f64 = rng.gen();
        let e = self.pairs[idx];
        state.set(e, false);
        let p = self.marginal(state, idx, lambda, rng)?;
        state.set(e, u < p);
        Ok(())
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        state: &mut DefectState,
        lambda: f64,
        steps: u64,
        rng: &mut R,
    ) -> Result<()> {
        if self.cap == 0 {
            return Ok(());
        }
        for _ in 0..steps {
            self.step(state, lambda, rng)?;
        }
        Ok(())
    }

    /// Runs `K n² ln(n/ε)` steps from the empty state at the configured `λ`.
    pub fn sample<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> Result<DefectState> {
        let mut s = self.start();
        self.run(&mut s, self.cfg.lambda, self.cfg.burn_in_steps(eps), rng)?;
        Ok(s)
    }
}

/// One update of the defect chain at the configured activity.
pub fn nu_glauber_step<R: Rng + ?Sized>(
    state: &mut DefectState,
    sampler: &DefectSampler,
    rng: &mut R,
) -> Result<()> {
    sampler.step(state, sampler.config().lambda, rng)
}

/// Draws `(S, T)` approximately from `ν_{A,B,λ}` within `eps` in total variation.
pub fn sample_defects<R: Rng + ?Sized>(
    part: &Partition,
    cfg: &HighDensityConfig,
    eps: f64,
    rng: &mut R,
) -> Result<DefectState> {
    DefectSampler::for_accuracy(part.clone(), *cfg, eps)?.sample(eps, rng)
}

/// Outcome of a `Zʷ_{A,B}` estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZwReport {
    pub estimate: LogEstimate,
    pub cap: usize,
    pub anneal: Option<AnnealReport>,
}

/// Anneals the joint weight `λ^{|S|+|T|+|E_cr|}` from `λ = 0`, where only the
/// empty configuration counts. The crossing part is integrated exactly when
/// `S□T` factors into small components and sampled otherwise.
struct WeakChain<'a> {
    sampler: &'a DefectSampler,
    limit: usize,
    crossing_tv: f64,
    zcache: Option<RwLock<HashMap<u64, Option<Polynomial>>>>,
}

#[derive(Clone)]
struct WeakState {
    defects: DefectState,
    crossing: usize,
}

impl WeakChain<'_> {
    /// `Z_{S□T}(lo)/Z_{S□T}(hi)` when the product factors into small pieces.
    fn inner_ratio(&self, s: &DefectState, lo: f64, hi: f64) -> Option<f64> {
        if let (Some(cache), Some(key)) = (&self.zcache, s.key()) {
            if let Some(z) = cache.read().expect("z cache").get(&key) {
                return z.as_ref().map(|z| z.eval(&lo) / z.eval(&hi));
            }
            let z = ProductFactors::new(s.partition(), s.defects(), self.limit).polynomial();
            let out = z.as_ref().map(|z| z.eval(&lo) / z.eval(&hi));
            cache.write().expect("z cache").insert(key, z);
            return out;
        }
        let f = ProductFactors::new(s.partition(), s.defects(), self.limit);
        Some((f.ln_z(lo)? - f.ln_z(hi)?).exp())
    }
}

impl AnnealChain for WeakChain<'_> {
    type State = WeakState;

    fn start(&self) -> WeakState {
        WeakState {
            defects: self.sampler.start(),
            crossing: 0,
        }
    }

    fn advance(&self, s: &mut WeakState, lambda: f64, steps: u64, rng: &mut ChainRng) {
        self.sampler
            .run(&mut s.defects, lambda, steps, rng)
            .expect("defect chain update failed");
        if self.inner_ratio(&s.defects, 0.0, lambda.max(f64::MIN_POSITIVE)).is_none() {
            s.crossing = hc_sample(&s.defects.view(), lambda, self.crossing_tv, rng).occupied_count();
        }
    }

    fn mixing_steps(&self, _lambda: f64, tv: f64) -> u64 {
        self.sampler.config().burn_in_steps(tv)
    }

    /// One coupon-collector sweep over the intra-part pairs.
    fn thin_steps(&self, _lambda: f64, tv: f64) -> u64 {
        let m = self.sampler.pairs().len().max(1) as f64;
        (m * (m / tv).ln().max(1.0)).ceil() as u64
    }

    fn ratio(&self, s: &WeakState, lo: f64, hi: f64) -> f64 {
        let q = lo / hi;
        let outer = q.powi(s.defects.size() as i32);
        match self.inner_ratio(&s.defects, lo, hi) {
            Some(r) => outer * r,
            None => outer * q.powi(s.crossing as i32),
        }
    }

    fn degree(&self) -> usize {
        let (a, b) = self.sampler.partition().sizes();
        self.sampler.pairs().len() + a * b
    }
}

/// `eps`-relative estimate of `Zʷ_{A,B}(λ)` with failure probability at most
/// `delta`; exact `(1+λ)^{|A||B|}` when the cap is zero.
pub fn estimate_zw<R: Rng + ?Sized>(
    part: &Partition,
    cfg: &HighDensityConfig,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<ZwReport> {
    cfg.validate()?;
    let cap = cfg.cap();
    let (a, b) = part.sizes();
    if cap == 0 {
        return Ok(ZwReport {
            estimate: LogEstimate::exact((a * b) as f64 * cfg.lambda.ln_1p()),
            cap,
            anneal: None,
        });
    }
    let limit = cfg.hardcore.exact_component_limit.min(64);
    if cap > 1 && 2.0 * cap as f64 * cfg.lambda > 1.0 {
        return Err(Error::HardcoreRegime {
            lambda: cfg.lambda,
            bound: 1.0 / (2 * cap) as f64,
        });
    }
    let sampler = DefectSampler::for_accuracy(part.clone(), *cfg, eps)?;
    let chain = WeakChain {
        sampler: &sampler,
        limit,
        crossing_tv: eps / 16.0,
        zcache: (part.n() * (part.n() - 1) / 2 <= 64 && a * b <= 40)
            .then(|| RwLock::new(HashMap::new())),
    };
    let rep = anneal(&chain, cfg.lambda, &AnnealConfig::new(eps, delta), rng);
    Ok(ZwReport {
        estimate: rep.estimate,
        cap,
        anneal: Some(rep),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{tv_to_histogram, Histogram, Oracle};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChainRng {
        ChainRng::seed_from_u64(seed)
    }

    #[test]
    fn cap_zero_chain_is_frozen() {
        let part = Partition::canonical(8, 4);
        let cfg = HighDensityConfig::new(8, 0.3);
        assert_eq!(cfg.cap(), 0);
        let s = sample_defects(&part, &cfg, 0.05, &mut rng(1)).unwrap();
        assert_eq!(s.size(), 0);
        let z = estimate_zw(&part, &cfg, 0.05, 0.1, &mut rng(1)).unwrap();
        assert_eq!(z.estimate, LogEstimate::exact(16.0 * 1.3f64.ln()));
    }

    #[test]
    fn tiny_lambda_empties_the_chain() {
        let part = Partition::canonical(6, 3);
        let cfg = HighDensityConfig::new(6, 1e-9).with_cap(1);
        let sampler = DefectSampler::for_accuracy(part, cfg, 0.05).unwrap();
        let mut s = sampler.start();
        let mut r = rng(2);
        for e in sampler.pairs().to_vec().into_iter().take(1) {
            s.set(e, true);
        }
        sampler.run(&mut s, 1e-9, 5_000, &mut r).unwrap();
        assert_eq!(s.size(), 0);
    }

    #[test]
    fn samples_stay_admissible() {
        let part = Partition::canonical(9, 5);
        let mut cfg = HighDensityConfig::new(9, 0.2).with_cap(2);
        cfg.step_eps = Some(0.2);
        cfg.step_delta = Some(0.2);
        cfg.hardcore.exact_component_limit = 20;
        let sampler = DefectSampler::for_accuracy(part, cfg, 0.05).unwrap();
        let mut r = rng(3);
        let mut s = sampler.start();
        for _ in 0..3_000 {
            sampler.step(&mut s, 0.2, &mut r).unwrap();
            assert!(s.max_degree() <= 2);
        }
        assert!(s.is_valid());
    }

    #[test]
    fn four_by_four_cap_one_matches_exact_law() {
        let oracle = Oracle::default();
        let part = Partition::canonical(8, 4);
        let lambda = 0.3;
        let cfg = HighDensityConfig::new(8, lambda).with_cap(1);
        let (exact, _) = oracle.exact_nu(&part, &lambda, 1).unwrap();
        let sampler = DefectSampler::for_accuracy(part, cfg, 0.05).unwrap();
        let mut r = rng(4);
        let mut h = Histogram::new();
        for _ in 0..3000 {
            let s = sampler.sample(0.05, &mut r).unwrap();
            h.add(s.key().unwrap());
        }
        let tv = tv_to_histogram(&exact, &h);
        assert!(tv < 0.1, "tv = {tv}");
    }

    #[test]
    fn edge_marginals_at_most_lambda() {
        let oracle = Oracle::default();
        let part = Partition::canonical(8, 4);
        let lambda = 0.3;
        let (exact, _) = oracle.exact_nu(&part, &lambda, 1).unwrap();
        for e in part.intra_pairs() {
            let bit = 1u64 << e.index(8);
            let m = exact.expectation(|s| if s & bit != 0 { 1.0 } else { 0.0 });
            assert!(m <= lambda);
        }
    }

    #[test]
    fn two_by_two_normalizer() {
        let part = Partition::canonical(4, 2);
        let lambda = 0.3;
        let cfg = HighDensityConfig::new(4, lambda).with_cap(1);
        let truth = {
            let l: f64 = lambda;
            ((1.0 + l).powi(4) + 2.0 * l * (1.0 + 2.0 * l).powi(2) + l * l * (1.0 + 4.0 * l + 2.0 * l * l)).ln()
        };
        let z = estimate_zw(&part, &cfg, 0.1, 0.1, &mut rng(5)).unwrap();
        assert!(z.estimate.contains(truth), "{} vs {truth}", z.estimate.log_value);
    }
}
