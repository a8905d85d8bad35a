//! Edge-update Glauber dynamics for `G(n,p)` conditioned on triangle-freeness.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{pair_count, EdgeId, EdgeIndexer, Graph, Toggle};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowDensityConfig {
    pub n: usize,
    pub p: f64,
    /// Burn-in is `K·n²·ln(n/ε)` steps.
    pub burn_in_k: f64,
    /// Slack `c` in `p ≤ c/√n`; the mixing guarantee needs `c < 1/√2`.
    pub c: f64,
}

impl LowDensityConfig {
    pub fn new(n: usize, p: f64) -> Self {
        Self {
            n,
            p,
            burn_in_k: 6.0,
            c: 0.7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::contract(format!("p = {} outside [0, 1]", self.p)));
        }
        if self.burn_in_k <= 0.0 {
            return Err(Error::contract("burn-in constant must be positive"));
        }
        Ok(())
    }

    pub fn in_regime(&self) -> bool {
        self.p <= self.c / (self.n as f64).sqrt()
    }

    /// `T = ⌈K·n²·ln(n/ε)⌉`, at least one sweep over the pairs.
    pub fn burn_in_steps(&self, eps: f64) -> u64 {
        let n = self.n as f64;
        let t = self.burn_in_k * n * n * (n / eps).ln().max(1.0);
        (t.ceil() as u64).max(pair_count(self.n) as u64)
    }

    /// `np + n^{1/3}`, the degree bound defining the good set for path coupling.
    pub fn degree_threshold(&self) -> f64 {
        let n = self.n as f64;
        n * self.p + n.cbrt()
    }

    /// `δ = 1 − 2(np + n^{1/3})p`.
    pub fn contraction_delta(&self) -> f64 {
        1.0 - 2.0 * self.degree_threshold() * self.p
    }
}

/// A chain's graph and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub graph: Graph,
    pub step: u64,
    pub stream: u64,
}

impl ChainState {
    pub fn empty(n: usize, stream: u64) -> Self {
        Self {
            graph: Graph::empty(n),
            step: 0,
            stream,
        }
    }
}

/// Resamples edge `e` given the uniform `u`: present iff `u < p` and adding it
/// closes no triangle.
#[inline]
pub fn apply_update(g: &mut Graph, e: EdgeId, u: f64, p: f64) -> Toggle {
    let present = u < p && !g.closes_triangle(e);
    g.set(e, present)
}

/// One Glauber update at a uniformly chosen pair.
#[inline]
pub fn glauber_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    pairs: &EdgeIndexer,
    p: f64,
    rng: &mut R,
) -> Toggle {
    let e = pairs.get(rng.gen_range(0..pairs.len()));
    let u: f64 = rng.gen();
    let t = apply_update(&mut state.graph, e, u, p);
    debug_assert!(!t.after || state.graph.triangles_through(e) == 0);
    state.step += 1;
    t
}

/// Monotone coupling of the constrained chain `x` with unconstrained `G(n,p)`
/// Glauber dynamics `y`: both use the same pair and the same uniform.
#[inline]
pub fn coupled_step<R: Rng + ?Sized>(
    x: &mut ChainState,
    y: &mut ChainState,
    pairs: &EdgeIndexer,
    p: f64,
    rng: &mut R,
) -> Result<()> {
    if !x.graph.is_subgraph_of(&y.graph) {
        return Err(Error::contract("coupled chains require x ⊆ y"));
    }
    let e = pairs.get(rng.gen_range(0..pairs.len()));
    let u: f64 = rng.gen();
    y.graph.set(e, u < p);
    apply_update(&mut x.graph, e, u, p);
    x.step += 1;
    y.step += 1;
    Ok(())
}

/// Exact one-step transition probabilities out of the state with edge mask
/// `mask` (requires `binom(n,2) ≤ 64`). Entries are `(next mask, probability)`
/// with the holding probability last.
pub fn transition_row<S: Scalar>(n: usize, mask: u64, p: &S) -> Vec<(u64, S)> {
    let pairs = pair_count(n);
    let per_pair = S::one() / S::from_u64_exact(pairs as u64);
    let g = Graph::from_edge_mask(n, mask);
    let mut stay = S::zero();
    let mut out = Vec::new();
    for k in 0..pairs {
        let e = EdgeId::from_index(k, n);
        let bit = 1u64 << k;
        let add_prob = if g.closes_triangle(e) {
            S::zero()
        } else {
            p.clone()
        };
        let remove_prob = S::one() - add_prob.clone();
        if mask & bit == 0 {
            if !add_prob.is_zero() {
                out.push((mask | bit, per_pair.clone() * add_prob));
            }
            stay = stay + per_pair.clone() * remove_prob;
        } else {
            if !remove_prob.is_zero() {
                out.push((mask & !bit, per_pair.clone() * remove_prob));
            }
            stay = stay + per_pair.clone() * add_prob;
        }
    }
    out.push((mask, stay));
    out
}

/// Reusable sampler: a chain from the empty graph run for the burn-in length.
#[derive(Debug, Clone)]
pub struct LowSampler {
    cfg: LowDensityConfig,
    pairs: EdgeIndexer,
}

impl LowSampler {
    pub fn new(cfg: LowDensityConfig) -> Result<Self> {
        cfg.validate()?;
        if !cfg.in_regime() {
            warn!(
                "p = {} exceeds {}/sqrt(n) at n = {}: no mixing guarantee",
                cfg.p, cfg.c, cfg.n
            );
        }
        Ok(Self {
            pairs: EdgeIndexer::new(cfg.n),
            cfg,
        })
    }

    pub fn config(&self) -> &LowDensityConfig {
        &self.cfg
    }

    pub fn pairs(&self) -> &EdgeIndexer {
        &self.pairs
    }

    pub fn run<R: Rng + ?Sized>(&self, state: &mut ChainState, p: f64, steps: u64, rng: &mut R) {
        if self.pairs.is_empty() {
            state.step += steps;
            return;
        }
        for _ in 0..steps {
            glauber_step(state, &self.pairs, p, rng);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> Graph {
        let mut state = ChainState::empty(self.cfg.n, 0);
        self.run(&mut state, self.cfg.p, self.cfg.burn_in_steps(eps), rng);
        state.graph
    }
}

/// Runs `T = K·n²·ln(n/ε)` Glauber steps from the empty graph.
pub fn sample_low<R: Rng + ?Sized>(cfg: &LowDensityConfig, eps: f64, rng: &mut R) -> Result<Graph> {
    Ok(LowSampler::new(*cfg)?.sample(eps, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionEstimate {
    pub trials: usize,
    /// Mean Hamming distance after one coupled step, by simulation.
    pub mean_distance: f64,
    pub std_error: f64,
    /// Same mean with the update averaged out exactly for each sampled pair.
    pub mean_expected_distance: f64,
    pub expected_std_error: f64,
    /// `1 − δ/binom(n,2)`.
    pub bound: f64,
    /// Pairs rejected because a state left the degree-bounded good set.
    pub rejected: usize,
}

/// Pairs `(X, Y)` differing in one edge `f`, with `X ⊂ Y` and both
/// triangle-free with maximum degree at most `np + n^{1/3}`, drawn by
/// perturbing stationary samples.
pub fn sample_adjacent_pair<R: Rng + ?Sized>(
    sampler: &LowSampler,
    eps: f64,
    rng: &mut R,
    rejected: &mut usize,
) -> (Graph, Graph, EdgeId) {
    let cfg = sampler.config();
    let threshold = cfg.degree_threshold();
    loop {
        let g = sampler.sample(eps, rng);
        let f = sampler.pairs().get(rng.gen_range(0..sampler.pairs().len()));
        let (x, y) = if g.contains(f) {
            let mut x = g.clone();
            x.remove(f);
            (x, g)
        } else if !g.closes_triangle(f) {
            let mut y = g.clone();
            y.insert(f);
            (g, y)
        } else {
            continue;
        };
        if (y.max_degree() as f64) <= threshold {
            return (x, y, f);
        }
        *rejected += 1;
    }
}

/// `E[d(X', Y')]` over one coupled update of an adjacent pair differing in `f`:
/// the update at `f` merges the pair, any other pair `e` adds a disagreement
/// with probability `p` exactly when `e` is addable in one state but not the other.
pub fn expected_coupled_distance(x: &Graph, y: &Graph, f: EdgeId, p: f64) -> f64 {
    let n = x.n();
    let total = pair_count(n) as f64;
    let mut split = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let e = EdgeId::between(i, j);
            if e != f && x.closes_triangle(e) != y.closes_triangle(e) {
                split += 1;
            }
        }
    }
    (total - 1.0) / total + p * split as f64 / total
}

/// Empirical one-step contraction of the path coupling on adjacent pairs.
pub fn estimate_contraction<R: Rng + ?Sized>(
    cfg: &LowDensityConfig,
    trials: usize,
    eps: f64,
    rng: &mut R,
) -> Result<ContractionEstimate> {
    let sampler = LowSampler::new(*cfg)?;
    let mut rejected = 0;
    let mut d_sum = 0.0;
    let mut d_sq = 0.0;
    let mut e_sum = 0.0;
    let mut e_sq = 0.0;
    // reuse each stationary pair for several coupled updates
    let per_pair = 100.min(trials.max(1));
    let mut done = 0;
    while done < trials {
        let (x, y, f) = sample_adjacent_pair(&sampler, eps, rng, &mut rejected);
        let expected = expected_coupled_distance(&x, &y, f, cfg.p);
        let reps = per_pair.min(trials - done);
        for _ in 0..reps {
            let (mut x1, mut y1) = (x.clone(), y.clone());
            let e = sampler.pairs().get(rng.gen_range(0..sampler.pairs().len()));
            let u: f64 = rng.gen();
            apply_update(&mut x1, e, u, cfg.p);
            apply_update(&mut y1, e, u, cfg.p);
            let d = x1.hamming_distance(&y1) as f64;
            d_sum += d;
            d_sq += d * d;
        }
        e_sum += expected * reps as f64;
        e_sq += expected * expected * reps as f64;
        done += reps;
    }
    let t = trials as f64;
    let mean = d_sum / t;
    let mean_e = e_sum / t;
    let se = ((d_sq / t - mean * mean).max(0.0) / t).sqrt();
    let se_e = ((e_sq / t - mean_e * mean_e).max(0.0) / t).sqrt();
    Ok(ContractionEstimate {
        trials,
        mean_distance: mean,
        std_error: se,
        mean_expected_distance: mean_e,
        expected_std_error: se_e,
        bound: 1.0 - cfg.contraction_delta() / pair_count(cfg.n) as f64,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{tv_to_histogram, Histogram, Oracle};
    use crate::scalar::rational_from_str;
    use num_rational::BigRational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn zero_p_empties_the_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs = EdgeIndexer::new(5);
        let mut s = ChainState::empty(5, 0);
        for k in 0..10 {
            s.graph.insert(pairs.get(k));
        }
        s.graph.remove(EdgeId::between(0, 1));
        let mut last = s.graph.edge_count();
        for _ in 0..2000 {
            glauber_step(&mut s, &pairs, 0.0, &mut rng);
            assert!(s.graph.edge_count() <= last);
            last = s.graph.edge_count();
        }
        assert_eq!(last, 0);
    }

    #[test]
    fn p_one_on_two_vertices_locks_in_the_edge() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pairs = EdgeIndexer::new(2);
        let mut s = ChainState::empty(2, 0);
        glauber_step(&mut s, &pairs, 1.0, &mut rng);
        for _ in 0..100 {
            assert_eq!(s.graph.edge_count(), 1);
            glauber_step(&mut s, &pairs, 1.0, &mut rng);
        }
    }

    #[test]
    fn never_outputs_a_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = LowDensityConfig::new(3, 0.3);
        for _ in 0..2000 {
            let g = sample_low(&cfg, 0.05, &mut rng).unwrap();
            assert!(g.is_triangle_free());
        }
    }

    #[test]
    fn triangle_freeness_survives_long_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 12;
        let pairs = EdgeIndexer::new(n);
        let mut s = ChainState::empty(n, 0);
        for step in 0..2_000_000u32 {
            let t = glauber_step(&mut s, &pairs, 0.6, &mut rng);
            assert!(!t.after || s.graph.triangles_through(t.edge) == 0);
            if step % 100_000 == 0 {
                assert!(s.graph.is_triangle_free());
            }
        }
        assert!(s.graph.is_triangle_free());
    }

    /// Detailed balance `μ(x)P(x,y) = μ(y)P(y,x)` holds exactly over all
    /// triangle-free graphs on up to four vertices.
    #[test]
    fn detailed_balance_in_rationals() {
        let o = Oracle::default();
        for n in 2..=4 {
            for p in ["1/5", "1/2", "9/10"] {
                let p: BigRational = rational_from_str(p).unwrap();
                let mu = o.exact_mu_distribution(n, &p).unwrap();
                let rows: HashMap<u64, Vec<(u64, BigRational)>> = mu
                    .iter()
                    .map(|(m, _)| (m, transition_row(n, m, &p)))
                    .collect();
                for (x, row) in &rows {
                    let total = row.iter().fold(BigRational::from_integer(0.into()), |a, (_, w)| a + w);
                    assert_eq!(total, BigRational::from_integer(1.into()));
                    for (y, pxy) in row {
                        let pyx = rows[y].iter().find(|(z, _)| z == x).map(|(_, w)| w.clone()).unwrap();
                        assert_eq!(mu.prob(*x) * pxy.clone(), mu.prob(*y) * pyx, "n={n} {x}->{y}");
                    }
                }
            }
        }
    }

    #[test]
    fn mean_edge_count_matches_oracle() {
        let (n, p) = (6, 0.15);
        let o = Oracle::default();
        let poly = o.triangle_free_polynomial(n).unwrap();
        let lambda = p / (1.0 - p);
        let mean = poly.mean_size(lambda);
        let var = {
            let z = poly.eval(&lambda);
            let m2: f64 = poly
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, &c)| (k * k) as f64 * c as f64 * lambda.powi(k as i32) / z)
                .sum();
            m2 - mean * mean
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = LowDensityConfig::new(n, p);
        let sampler = LowSampler::new(cfg).unwrap();
        let samples = 20_000;
        let total: usize = (0..samples).map(|_| sampler.sample(0.05, &mut rng).edge_count()).sum();
        let emp = total as f64 / samples as f64;
        let se = (var / samples as f64).sqrt();
        assert!((emp - mean).abs() <= 3.0 * se, "emp {emp} exact {mean} se {se}");
    }

    #[test]
    fn small_n_sampler_is_close_to_exact_law() {
        let (n, p) = (4, 0.3);
        let exact = Oracle::default().exact_mu_distribution(n, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sampler = LowSampler::new(LowDensityConfig::new(n, p)).unwrap();
        let hist: Histogram = (0..40_000).map(|_| sampler.sample(0.05, &mut rng).edge_mask()).collect();
        // 41 states and 4·10⁴ samples put the noise floor near 0.01
        assert!(tv_to_histogram(&exact, &hist) < 0.03);
    }

    #[test]
    fn degree_tail_is_below_the_chernoff_envelope() {
        let (n, p) = (6usize, 0.15);
        let eps = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sampler = LowSampler::new(LowDensityConfig::new(n, p)).unwrap();
        let samples = 20_000;
        let threshold = (1.0 + eps) * (n - 1) as f64 * p;
        let hits = (0..samples)
            .filter(|_| sampler.sample(0.05, &mut rng).max_degree() as f64 >= threshold)
            .count();
        let frac = hits as f64 / samples as f64;
        let envelope = n as f64 * (-eps * eps * (n - 1) as f64 * p / 3.0).exp();
        assert!(frac <= envelope + 3.0 * (0.25 / samples as f64).sqrt());
    }

    #[test]
    fn coupling_keeps_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 20;
        let pairs = EdgeIndexer::new(n);
        let mut x = ChainState::empty(n, 0);
        let mut y = ChainState::empty(n, 1);
        // y starts from a Hamiltonian path, x from empty
        for v in 1..n {
            y.graph.insert(EdgeId::between(v - 1, v));
        }
        for _ in 0..100_000 {
            coupled_step(&mut x, &mut y, &pairs, 0.2, &mut rng).unwrap();
            assert!(x.graph.is_subgraph_of(&y.graph));
        }
        let mut x = ChainState::empty(n, 0);
        let mut y = ChainState::empty(n, 1);
        for _ in 0..10_000 {
            coupled_step(&mut x, &mut y, &pairs, 0.0, &mut rng).unwrap();
            assert_eq!(y.graph.edge_count(), 0);
        }
        x.graph.insert(EdgeId::between(0, 1));
        assert!(coupled_step(&mut x, &mut y, &pairs, 0.1, &mut rng).is_err());
    }

    #[test]
    fn contraction_at_zero_p_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 7;
        let mut y = Graph::empty(n);
        y.insert(EdgeId::between(0, 1));
        let x = Graph::empty(n);
        let f = EdgeId::between(0, 1);
        let total = pair_count(n) as f64;
        assert_eq!(expected_coupled_distance(&x, &y, f, 0.0), 1.0 - 1.0 / total);
        // updating the differing pair merges the states
        for u in [0.0, 0.5, 0.99] {
            let (mut x1, mut y1) = (x.clone(), y.clone());
            apply_update(&mut x1, f, u, 0.3);
            apply_update(&mut y1, f, u, 0.3);
            assert_eq!(x1.hamming_distance(&y1), 0);
        }
        let est = estimate_contraction(&LowDensityConfig::new(n, 0.0), 20_000, 0.05, &mut rng).unwrap();
        assert!((est.mean_expected_distance - (1.0 - 1.0 / total)).abs() < 1e-12);
        assert!((est.mean_distance - (1.0 - 1.0 / total)).abs() < 4.0 * est.std_error.max(1e-3));
    }

    #[test]
    fn simulated_and_averaged_contraction_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cfg = LowDensityConfig::new(30, 0.5 / 30f64.sqrt());
        let est = estimate_contraction(&cfg, 50_000, 0.05, &mut rng).unwrap();
        let gap = (est.mean_distance - est.mean_expected_distance).abs();
        assert!(gap < 4.0 * est.std_error, "{est:?}");
        assert!(est.mean_expected_distance <= est.bound);
    }
}
