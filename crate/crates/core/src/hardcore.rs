//! Hard-core model on a [`HostGraph`]: Glauber sampling and partition-function
//! estimation for `λ ≤ 1/Δ`.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anneal::{anneal, AnnealChain, AnnealConfig, LogEstimate};
use crate::error::{Error, Result};
use crate::host::{AdjGraph, HostGraph};
use crate::oracle::independence_polynomial;
use crate::rng::ChainRng;

/// Occupancy vector of an independent set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndependentSetState {
    occ: Vec<bool>,
    occupied: usize,
}

impl IndependentSetState {
    pub fn empty(v: usize) -> Self {
        Self {
            occ: vec![false; v],
            occupied: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.occ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occ.is_empty()
    }

    #[inline]
    pub fn is_occupied(&self, v: usize) -> bool {
        self.occ[v]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied
    }

    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.occ.iter().enumerate().filter(|(_, &b)| b).map(|(v, _)| v)
    }

    /// Bit mask of occupied vertices; requires at most 64 vertices.
    pub fn mask(&self) -> u64 {
        assert!(self.occ.len() <= 64);
        self.occupied().fold(0, |m, v| m | 1 << v)
    }

    pub fn is_independent<H: HostGraph + ?Sized>(&self, host: &H) -> bool {
        self.occupied()
            .all(|v| !host.any_neighbor(v, |w| self.occ[w]))
    }

    fn set(&mut self, v: usize, on: bool) {
        if self.occ[v] != on {
            self.occ[v] = on;
            if on {
                self.occupied += 1;
            } else {
                self.occupied -= 1;
            }
        }
    }
}

/// Resamples vertex `v` given the uniform `u`.
#[inline]
pub fn hc_update<H: HostGraph + ?Sized>(
    host: &H,
    s: &mut IndependentSetState,
    v: usize,
    u: f64,
    lambda: f64,
) {
    let on = u * (1.0 + lambda) < lambda && !host.any_neighbor(v, |w| s.occ[w]);
    s.set(v, on);
}

pub fn hc_glauber_step<H: HostGraph + ?Sized, R: Rng + ?Sized>(
    host: &H,
    s: &mut IndependentSetState,
    lambda: f64,
    rng: &mut R,
) {
    let v = rng.gen_range(0..s.len());
    let u: f64 = rng.gen();
    hc_update(host, s, v, u, lambda);
}

/// Path-coupling step count `⌈V ln(V/ε)/γ⌉`, `γ = 1 − Δλ/(1+λ)`.
pub fn hc_mixing_steps(vertices: usize, max_degree: usize, lambda: f64, eps: f64) -> u64 {
    if vertices == 0 {
        return 0;
    }
    let v = vertices as f64;
    let gamma = (1.0 - max_degree as f64 * lambda / (1.0 + lambda)).max(0.05);
    (v * (v / eps).ln().max(1.0) / gamma).ceil() as u64
}

pub fn in_hardcore_regime<H: HostGraph + ?Sized>(host: &H, lambda: f64) -> bool {
    lambda * host.max_degree() as f64 <= 1.0
}

/// Runs Glauber dynamics from the empty set long enough to be `eps`-close to
/// the hard-core measure when `λ ≤ 1/Δ`.
pub fn hc_sample<H: HostGraph + ?Sized, R: Rng + ?Sized>(
    host: &H,
    lambda: f64,
    eps: f64,
    rng: &mut R,
) -> IndependentSetState {
    let v = host.vertex_count();
    let delta = host.max_degree();
    if !in_hardcore_regime(host, lambda) {
        warn!("hard-core activity {lambda} exceeds 1/Δ = {}", 1.0 / delta as f64);
    }
    let mut s = IndependentSetState::empty(v);
    if v == 0 {
        return s;
    }
    for _ in 0..hc_mixing_steps(v, delta, lambda, eps) {
        hc_glauber_step(host, &mut s, lambda, rng);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardcoreConfig {
    /// Connected components up to this size are summed exactly.
    pub exact_component_limit: usize,
}

impl Default for HardcoreConfig {
    fn default() -> Self {
        Self {
            exact_component_limit: 16,
        }
    }
}

struct HardcoreChain<'a> {
    host: &'a AdjGraph,
    delta: usize,
}

impl AnnealChain for HardcoreChain<'_> {
    type State = IndependentSetState;

    fn start(&self) -> IndependentSetState {
        IndependentSetState::empty(self.host.vertex_count())
    }

    fn advance(&self, s: &mut IndependentSetState, lambda: f64, steps: u64, rng: &mut ChainRng) {
        for _ in 0..steps {
            hc_glauber_step(self.host, s, lambda, rng);
        }
    }

    fn mixing_steps(&self, lambda: f64, tv: f64) -> u64 {
        hc_mixing_steps(self.host.vertex_count(), self.delta, lambda, tv)
    }

    fn ratio(&self, s: &IndependentSetState, lo: f64, hi: f64) -> f64 {
        (lo / hi).powi(s.occupied_count() as i32)
    }

    fn degree(&self) -> usize {
        self.host.vertex_count()
    }
}

/// `ε`-relative estimate of `Z_H(λ)` with failure probability at most `delta`.
///
/// Small connected components are summed exactly; the rest of the host is
/// estimated jointly by annealing.
pub fn hc_estimate_z<H: HostGraph + ?Sized, R: Rng + ?Sized>(
    host: &H,
    lambda: f64,
    eps: f64,
    delta: f64,
    cfg: &HardcoreConfig,
    rng: &mut R,
) -> Result<LogEstimate> {
    let dmax = host.max_degree();
    if !in_hardcore_regime(host, lambda) {
        return Err(Error::HardcoreRegime {
            lambda,
            bound: 1.0 / dmax as f64,
        });
    }
    if lambda < 0.0 || eps <= 0.0 || !(0.0..1.0).contains(&delta) {
        return Err(Error::contract("need λ ≥ 0, eps > 0 and delta in [0, 1)"));
    }
    let g = AdjGraph::from_host(host);
    let mut exact_log = 0.0;
    let mut rest = Vec::new();
    for comp in g.components() {
        match comp.len() {
            1 => exact_log += lambda.ln_1p(),
            k if k <= cfg.exact_component_limit.min(64) => {
                exact_log += independence_polynomial(&g.induced(&comp)).ln_eval(lambda);
            }
            _ => rest.extend(comp),
        }
    }
    if rest.is_empty() {
        return Ok(LogEstimate::exact(exact_log));
    }
    rest.sort_unstable();
    let sub = g.induced(&rest);
    let chain = HardcoreChain {
        delta: sub.max_degree(),
        host: &sub,
    };
    let rep = anneal(&chain, lambda, &AnnealConfig::new(eps, delta), rng);
    Ok(LogEstimate {
        log_value: exact_log + rep.estimate.log_value,
        eps,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeId, Graph};
    use crate::host::ProductGraphView;
    use crate::oracle::{tv_to_histogram, Histogram, Oracle};
    use crate::partition::Partition;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChainRng {
        ChainRng::seed_from_u64(seed)
    }

    #[test]
    fn zero_activity_empties() {
        let host = AdjGraph::cycle(6);
        let mut s = IndependentSetState::empty(6);
        s.set(0, true);
        s.set(3, true);
        let mut r = rng(1);
        let mut last = 2;
        for _ in 0..500 {
            hc_glauber_step(&host, &mut s, 0.0, &mut r);
            assert!(s.occupied_count() <= last);
            last = s.occupied_count();
        }
        assert_eq!(last, 0);
    }

    #[test]
    fn independence_is_preserved() {
        let mut r = rng(2);
        let host = AdjGraph::cycle(9);
        let mut s = IndependentSetState::empty(9);
        for step in 0..2_000_000 {
            hc_glauber_step(&host, &mut s, 3.0, &mut r);
            if step % 1000 == 0 {
                assert!(s.is_independent(&host));
            }
        }
        assert!(s.is_independent(&host));
    }

    #[test]
    fn single_vertex_occupancy() {
        let mut r = rng(3);
        let host = AdjGraph::empty(1);
        let lambda = 0.6;
        let trials = 40_000;
        let hits = (0..trials)
            .filter(|_| hc_sample(&host, lambda, 0.01, &mut r).occupied_count() == 1)
            .count();
        let p = lambda / (1.0 + lambda);
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn c4_marginals() {
        let host = AdjGraph::cycle(4);
        let lambda = 0.25;
        let exact = Oracle::default().exact_hardcore_marginals(&host, &lambda).unwrap();
        let mut r = rng(4);
        let mut s = IndependentSetState::empty(4);
        let mut counts = [0usize; 4];
        let steps = 100_000;
        for _ in 0..steps {
            hc_glauber_step(&host, &mut s, lambda, &mut r);
            for (v, c) in counts.iter_mut().enumerate() {
                *c += s.is_occupied(v) as usize;
            }
        }
        for v in 0..4 {
            assert!((counts[v] as f64 / steps as f64 - exact[v]).abs() < 0.01);
        }
    }

    #[test]
    fn edgeless_host_is_a_product_measure() {
        let mut r = rng(5);
        let host = AdjGraph::empty(6);
        let lambda = 0.3;
        let p = lambda / (1.0 + lambda);
        let trials = 20_000;
        let mut counts = [0usize; 6];
        for _ in 0..trials {
            let s = hc_sample(&host, lambda, 0.01, &mut r);
            for (v, c) in counts.iter_mut().enumerate() {
                *c += s.is_occupied(v) as usize;
            }
        }
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        for c in counts {
            assert!((c as f64 / trials as f64 - p).abs() < 3.5 * se);
        }
    }

    #[test]
    fn k2_law() {
        let host = AdjGraph::complete(2);
        let lambda = 0.4;
        let exact = Oracle::default().exact_hardcore_distribution(&host, &lambda).unwrap();
        let mut r = rng(6);
        let hist: Histogram = (0..10_000).map(|_| hc_sample(&host, lambda, 0.01, &mut r).mask()).collect();
        assert!(tv_to_histogram(&exact, &hist) <= 0.02);
    }

    #[test]
    fn product_view_samples_are_matching_independent_sets() {
        let part = Partition::canonical(4, 2);
        let mut d = Graph::empty(4);
        d.insert(EdgeId::between(0, 1));
        let view = ProductGraphView::new(&part, &d);
        let lambda = 0.5;
        let exact = Oracle::default().exact_hardcore_distribution(&view, &lambda).unwrap();
        let mut r = rng(7);
        let hist: Histogram = (0..20_000)
            .map(|_| {
                let s = hc_sample(&view, lambda, 0.01, &mut r);
                assert!(s.is_independent(&view));
                s.mask()
            })
            .collect();
        assert_eq!(exact.support_len(), 9);
        assert!(tv_to_histogram(&exact, &hist) <= 0.02);
    }

    #[test]
    fn estimates_closed_forms() {
        let mut r = rng(8);
        let cfg = HardcoreConfig::default();
        let est = hc_estimate_z(&AdjGraph::empty(7), 0.2, 0.05, 0.1, &cfg, &mut r).unwrap();
        assert!((est.log_value - 7.0 * 1.2f64.ln()).abs() < 1e-12);
        let est = hc_estimate_z(&AdjGraph::cycle(4), 0.25, 0.05, 0.1, &cfg, &mut r).unwrap();
        assert!((est.log_value - 2.125f64.ln()).abs() < 1e-12);

        let mcmc = HardcoreConfig {
            exact_component_limit: 0,
        };
        let est = hc_estimate_z(&AdjGraph::cycle(4), 0.25, 0.05, 0.1, &mcmc, &mut r).unwrap();
        assert!(est.contains(2.125f64.ln()), "{est:?}");
        let est = hc_estimate_z(&AdjGraph::empty(5), 0.2, 0.05, 0.1, &mcmc, &mut r).unwrap();
        assert!(est.contains(5.0 * 1.2f64.ln()), "{est:?}");
    }

    #[test]
    fn refuses_outside_regime() {
        let mut r = rng(9);
        let err = hc_estimate_z(&AdjGraph::complete(4), 0.5, 0.05, 0.1, &HardcoreConfig::default(), &mut r);
        assert!(matches!(err, Err(Error::HardcoreRegime { .. })));
    }

    #[test]
    fn path_failure_rate_is_within_delta() {
        let host = AdjGraph::path(4);
        let lambda: f64 = 0.3;
        let truth = Oracle::default().exact_hardcore_z(&host, &lambda).unwrap().ln();
        let mcmc = HardcoreConfig {
            exact_component_limit: 0,
        };
        let mut r = rng(10);
        let reps = 200;
        let failures = (0..reps)
            .filter(|_| {
                !hc_estimate_z(&host, lambda, 0.05, 0.1, &mcmc, &mut r)
                    .unwrap()
                    .contains(truth)
            })
            .count();
        assert!(failures as f64 <= 0.1 * reps as f64, "{failures}/{reps}");
    }

    #[test]
    fn halving_eps_stays_inside_the_coarser_interval() {
        let host = AdjGraph::cycle(5);
        let lambda = 0.4;
        let mcmc = HardcoreConfig {
            exact_component_limit: 0,
        };
        let mut r = rng(11);
        let mut inside = 0;
        let reps = 30;
        for _ in 0..reps {
            let coarse = hc_estimate_z(&host, lambda, 0.1, 0.1, &mcmc, &mut r).unwrap();
            let fine = hc_estimate_z(&host, lambda, 0.05, 0.1, &mcmc, &mut r).unwrap();
            if (coarse.log_value - fine.log_value).abs() <= coarse.eps + fine.eps {
                inside += 1;
            }
        }
        // both intervals hold with probability 0.9 each
        assert!(inside as f64 >= 0.8 * reps as f64, "{inside}/{reps}");
    }
}
