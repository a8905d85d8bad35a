//! End-to-end sampling at high density and the two approximate counters.
//!
//! Partitions are ordered pairs `(A, B)` and the signed imbalance is
//! `|A| − |B|`. Since `Zʷ_{A,B}` depends only on the part sizes and is
//! symmetric in them, the weak normalizer is
//! `Σ_{k ≥ 0} w_k Z_k` with `w_0 = binom(n, n/2)` and
//! `w_k = 2·binom(n, (n+k)/2)` for `k > 0`.

use log::warn;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{anneal, AnnealChain, AnnealConfig, LogEstimate};
use crate::defect::{estimate_zw, DefectSampler, DefectState, HighDensityConfig};
use crate::error::{Error, Result};
use crate::glauber_low::{glauber_step, ChainState, LowDensityConfig};
use crate::graph::{pair_count, EdgeId, EdgeIndexer, Graph};
use crate::hardcore::{hc_mixing_steps, hc_sample};
use crate::host::HostGraph;
use crate::partition::Partition;
use crate::poly::{ln_binomial, log_sum_exp};
use crate::rng::{child_rng, ChainRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub defect: HighDensityConfig,
    /// Largest `||A| − |B||`; default `⌊n/10⌋`, raised to 1 for odd `n`.
    pub max_imbalance: Option<usize>,
}

impl PipelineConfig {
    pub fn new(n: usize, lambda: f64) -> Self {
        Self {
            defect: HighDensityConfig::new(n, lambda),
            max_imbalance: None,
        }
    }

    pub fn n(&self) -> usize {
        self.defect.n
    }

    pub fn lambda(&self) -> f64 {
        self.defect.lambda
    }

    pub fn max_imbalance(&self) -> usize {
        let n = self.n();
        self.max_imbalance.unwrap_or((n / 10).max(n % 2)).min(n)
    }

    /// Admissible `k ≥ 0` with `k ≡ n (mod 2)`.
    pub fn imbalances(&self) -> Vec<usize> {
        let n = self.n();
        (n % 2..=self.max_imbalance()).step_by(2).collect()
    }
}

/// `w_k` in log form.
pub fn log_partition_weight(n: usize, k: usize) -> f64 {
    let w = ln_binomial(n, (n + k) / 2);
    if k > 0 {
        w + 2f64.ln()
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceEntry {
    pub k: usize,
    pub log_weight: f64,
    pub log_z: LogEstimate,
}

/// `Z_k(λ)` estimates for each admissible imbalance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceTable {
    pub n: usize,
    pub lambda: f64,
    pub entries: Vec<ImbalanceEntry>,
}

impl ImbalanceTable {
    /// Estimates each `Z_k` to `eps` with failure probability `delta` each.
    pub fn build<R: Rng + ?Sized>(cfg: &PipelineConfig, eps: f64, delta: f64, rng: &mut R) -> Result<Self> {
        let n = cfg.n();
        let ks = cfg.imbalances();
        if ks.is_empty() {
            return Err(Error::contract("no admissible imbalance"));
        }
        let seeds: Vec<u64> = ks.iter().map(|_| rng.gen()).collect();
        let entries = ks
            .par_iter()
            .zip(seeds)
            .map(|(&k, seed)| {
                let part = Partition::canonical(n, (n + k) / 2);
                let mut r = <ChainRng as rand::SeedableRng>::seed_from_u64(seed);
                let z = estimate_zw(&part, &cfg.defect, eps, delta, &mut r)?;
                Ok(ImbalanceEntry {
                    k,
                    log_weight: log_partition_weight(n, k),
                    log_z: z.estimate,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            lambda: cfg.lambda(),
            entries,
        })
    }

    /// `ln Σ_k w_k Z_k`.
    pub fn log_total(&self) -> f64 {
        log_sum_exp(self.entries.iter().map(|e| e.log_weight + e.log_z.log_value))
    }

    /// `P(|imbalance| = k)` for each entry.
    pub fn probabilities(&self) -> Vec<f64> {
        let t = self.log_total();
        self.entries
            .iter()
            .map(|e| (e.log_weight + e.log_z.log_value - t).exp())
            .collect()
    }
}

/// Draws `k` with probability `∝ w_k Z_k`, a sign, and a uniform partition
/// with `|A| − |B|` equal to the signed imbalance.
pub fn sample_imbalance<R: Rng + ?Sized>(table: &ImbalanceTable, rng: &mut R) -> (i64, Partition) {
    let probs = table.probabilities();
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut pick = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            pick = i;
            break;
        }
    }
    let k = table.entries[pick].k;
    let signed = if k > 0 && rng.gen::<bool>() { -(k as i64) } else { k as i64 };
    let n = table.n;
    let size_a = (n as i64 + signed) as usize / 2;
    let a = sample_indices(rng, n, size_a).into_vec();
    let part = Partition::from_a_set(n, &a).expect("indices are in range");
    (signed, part)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostics {
    pub cap: usize,
    pub defect_steps: u64,
    /// Glauber steps on `S□T`; zero when the crossing edges were drawn exactly.
    pub crossing_steps: u64,
    pub defect_edges: usize,
    pub crossing_edges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub imbalance: i64,
    pub partition: Partition,
    pub defects: DefectState,
    pub crossing: Vec<EdgeId>,
    pub graph: Graph,
    pub diagnostics: StageDiagnostics,
}

impl SampleRecord {
    /// Triangle-free, defects within the cap, `G[A] ∪ G[B] = S ∪ T` and the
    /// crossing edges form an independent set of `S□T`.
    pub fn check(&self) -> Result<()> {
        if !self.graph.is_triangle_free() {
            return Err(Error::contract("output has a triangle"));
        }
        let intra = self.graph.intra_part(&self.partition);
        if intra != *self.defects.defects() {
            return Err(Error::contract("intra-part edges differ from the defects"));
        }
        if intra.max_degree() > self.defects.cap() {
            return Err(Error::contract("defects exceed the cap"));
        }
        if !crossing_is_independent(&self.partition, &intra, &self.crossing) {
            return Err(Error::contract("crossing edges are not independent in S□T"));
        }
        Ok(())
    }
}

/// `(a,b),(a',b')` are adjacent in `S□T` iff `a = a'` and `bb' ∈ T`, or
/// `b = b'` and `aa' ∈ S`.
pub fn crossing_is_independent(part: &Partition, defects: &Graph, crossing: &[EdgeId]) -> bool {
    let oriented: Vec<(usize, usize)> = crossing
        .iter()
        .map(|e| {
            if part.side(e.i()) == crate::partition::Side::A {
                (e.i(), e.j())
            } else {
                (e.j(), e.i())
            }
        })
        .collect();
    for (x, &(a, b)) in oriented.iter().enumerate() {
        for &(a2, b2) in &oriented[x + 1..] {
            if (a == a2 && defects.has_edge(b, b2)) || (b == b2 && defects.has_edge(a, a2)) {
                return false;
            }
        }
    }
    true
}

/// Composes imbalance sampling, the defect chain and a hard-core draw on
/// `S□T`. `eps` is split evenly between the two chains.
pub fn sample_high<R: Rng + ?Sized>(
    cfg: &PipelineConfig,
    table: &ImbalanceTable,
    eps: f64,
    rng: &mut R,
) -> Result<SampleRecord> {
    let (imbalance, part) = sample_imbalance(table, rng);
    let dcfg = cfg.defect;
    let lambda = dcfg.lambda;
    let sampler = DefectSampler::for_accuracy(part.clone(), dcfg, eps / 2.0)
        .map_err(|e| e.in_stage("defects"))?;
    let defect_steps = if sampler.cap() == 0 { 0 } else { dcfg.burn_in_steps(eps / 2.0) };
    let defects = sampler
        .sample(eps / 2.0, rng)
        .map_err(|e| e.in_stage("defects"))?;

    let view = defects.view();
    let mut crossing_steps = 0;
    let occupied: Vec<usize> = if defects.size() == 0 {
        // no edges in S□T: independent Bernoulli(λ/(1+λ)) pairs
        let q = lambda / (1.0 + lambda);
        (0..view.vertex_count()).filter(|_| rng.gen::<f64>() < q).collect()
    } else {
        crossing_steps = hc_mixing_steps(view.vertex_count(), view.max_degree(), lambda, eps / 2.0);
        hc_sample(&view, lambda, eps / 2.0, rng).occupied().collect()
    };
    let crossing: Vec<EdgeId> = occupied
        .into_iter()
        .map(|v| {
            let (a, b) = view.coords(v);
            EdgeId::between(a, b)
        })
        .collect();
    let mut graph = defects.defects().clone();
    for &e in &crossing {
        graph.insert(e);
    }
    let diagnostics = StageDiagnostics {
        cap: defects.cap(),
        defect_steps,
        crossing_steps,
        defect_edges: defects.size(),
        crossing_edges: crossing.len(),
    };
    let record = SampleRecord {
        imbalance,
        partition: part,
        defects,
        crossing,
        graph,
        diagnostics,
    };
    record.check().map_err(|e| e.in_stage("assemble"))?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighCount {
    /// `ln Z_weak(λ)`.
    pub log_z_weak: LogEstimate,
    /// `ln((1−p)^{binom(n,2)} Z_weak(λ))` with `p = λ/(1+λ)`.
    pub log_mu: LogEstimate,
    pub table: ImbalanceTable,
}

/// `eps`-relative estimate of `μ_p(𝒯)` through the weak normalizer; each
/// `Z_k` gets failure probability `delta / #k`.
pub fn count_high<R: Rng + ?Sized>(cfg: &PipelineConfig, eps: f64, delta: f64, rng: &mut R) -> Result<HighCount> {
    let n = cfg.n();
    let lambda = cfg.lambda();
    if !cfg.defect.in_regime() {
        warn!("λ = {lambda} is outside the high-density regime at n = {n}");
    }
    let per_k = delta / cfg.imbalances().len().max(1) as f64;
    let table = ImbalanceTable::build(cfg, eps, per_k, rng)?;
    let log_total = table.log_total();
    let eps_max = table.entries.iter().map(|e| e.log_z.eps).fold(0.0, f64::max);
    let delta_sum = table.entries.iter().map(|e| e.log_z.delta).sum::<f64>().min(1.0);
    let log_z_weak = LogEstimate {
        log_value: log_total,
        eps: eps_max,
        delta: delta_sum,
    };
    let log_mu = LogEstimate {
        log_value: log_total - pair_count(n) as f64 * lambda.ln_1p(),
        ..log_z_weak
    };
    Ok(HighCount {
        log_z_weak,
        log_mu,
        table,
    })
}

/// The constrained Glauber chain seen as a chain over activities
/// `λ′ = p′/(1−p′)`, for annealing `Z(λ) = Σ_{G∈𝒯} λ^{|G|}`.
struct LowChain {
    cfg: LowDensityConfig,
    pairs: EdgeIndexer,
}

impl AnnealChain for LowChain {
    type State = ChainState;

    fn start(&self) -> ChainState {
        ChainState::empty(self.cfg.n, 0)
    }

    fn advance(&self, s: &mut ChainState, lambda: f64, steps: u64, rng: &mut ChainRng) {
        let p = lambda / (1.0 + lambda);
        for _ in 0..steps {
            glauber_step(s, &self.pairs, p, rng);
        }
    }

    fn mixing_steps(&self, _lambda: f64, tv: f64) -> u64 {
        self.cfg.burn_in_steps(tv)
    }

    /// One coupon-collector sweep over the pairs.
    fn thin_steps(&self, _lambda: f64, tv: f64) -> u64 {
        let m = self.pairs.len().max(1) as f64;
        (m * (m / tv).ln().max(1.0)).ceil() as u64
    }

    fn ratio(&self, s: &ChainState, lo: f64, hi: f64) -> f64 {
        (lo / hi).powi(s.graph.edge_count() as i32)
    }

    fn degree(&self) -> usize {
        self.pairs.len()
    }
}

/// `eps`-relative estimate of `μ_p(𝒯)` with failure probability `delta`, by
/// annealing the low-density chain from `p′ = 0`.
pub fn count_low<R: Rng + ?Sized>(cfg: &LowDensityConfig, eps: f64, delta: f64, rng: &mut R) -> Result<LogEstimate> {
    cfg.validate()?;
    if cfg.p >= 1.0 {
        return Err(Error::contract("p must be below 1"));
    }
    if !cfg.in_regime() {
        warn!("p = {} is outside the low-density regime at n = {}", cfg.p, cfg.n);
    }
    if cfg.p == 0.0 || cfg.n < 3 {
        return Ok(LogEstimate::exact(0.0));
    }
    let lambda = cfg.p / (1.0 - cfg.p);
    let chain = LowChain {
        cfg: *cfg,
        pairs: EdgeIndexer::new(cfg.n),
    };
    let mut r = child_rng(rng);
    let rep = anneal(&chain, lambda, &AnnealConfig::new(eps, delta), &mut r);
    Ok(LogEstimate {
        log_value: rep.estimate.log_value + pair_count(cfg.n) as f64 * (1.0 - cfg.p).ln(),
        ..rep.estimate
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Oracle;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChainRng {
        ChainRng::seed_from_u64(seed)
    }

    #[test]
    fn admissible_imbalances_follow_parity() {
        assert_eq!(PipelineConfig::new(8, 0.3).imbalances(), vec![0]);
        assert_eq!(PipelineConfig::new(9, 0.3).imbalances(), vec![1]);
        assert_eq!(PipelineConfig::new(40, 0.3).imbalances(), vec![0, 2, 4]);
        let mut c = PipelineConfig::new(4, 0.3);
        c.max_imbalance = Some(2);
        assert_eq!(c.imbalances(), vec![0, 2]);
    }

    #[test]
    fn cap_zero_imbalance_weights() {
        let lambda = 0.3f64;
        let mut cfg = PipelineConfig::new(4, lambda);
        cfg.max_imbalance = Some(2);
        let table = ImbalanceTable::build(&cfg, 0.05, 0.1, &mut rng(1)).unwrap();
        let w0 = 6.0 * (1.0 + lambda).powi(4);
        let w2 = 2.0 * 4.0 * (1.0 + lambda).powi(3);
        let p = table.probabilities();
        assert!((p[0] - w0 / (w0 + w2)).abs() < 1e-12);
        let mut r = rng(2);
        let trials = 20_000;
        let mut zero = 0;
        for _ in 0..trials {
            let (k, part) = sample_imbalance(&table, &mut r);
            let (a, b) = part.sizes();
            assert_eq!(a as i64 - b as i64, k);
            if k == 0 {
                zero += 1;
            }
        }
        let q = w0 / (w0 + w2);
        let sd = (q * (1.0 - q) / trials as f64).sqrt();
        assert!((zero as f64 / trials as f64 - q).abs() < 4.0 * sd);
    }

    #[test]
    fn count_high_cap_zero_closed_form() {
        let n = 40;
        let lambda = 0.3f64;
        let cfg = PipelineConfig::new(n, lambda);
        let c = count_high(&cfg, 0.05, 0.1, &mut rng(3)).unwrap();
        let truth = log_sum_exp(cfg.imbalances().into_iter().map(|k| {
            log_partition_weight(n, k) + ((n * n - k * k) / 4) as f64 * lambda.ln_1p()
        }));
        assert!((c.log_z_weak.log_value - truth).abs() < 1e-9);
    }

    #[test]
    fn count_high_matches_weak_normalizer() {
        let lambda = 0.3f64;
        let cfg = PipelineConfig {
            defect: HighDensityConfig::new(6, lambda).with_cap(1),
            max_imbalance: Some(0),
        };
        let truth = Oracle::default()
            .exact_weak_normalizer(6, 1, 0)
            .unwrap()
            .ln_eval(lambda);
        let c = count_high(&cfg, 0.1, 0.1, &mut rng(4)).unwrap();
        assert!(c.log_z_weak.contains(truth), "{} vs {truth}", c.log_z_weak.log_value);
    }

    #[test]
    fn high_samples_satisfy_invariants() {
        let n = 60;
        let cfg = PipelineConfig::new(n, 5.0 / (n as f64).sqrt());
        let mut r = rng(5);
        let table = ImbalanceTable::build(&cfg, 0.05, 0.1, &mut r).unwrap();
        for _ in 0..20 {
            let s = sample_high(&cfg, &table, 0.05, &mut r).unwrap();
            s.check().unwrap();
            assert_eq!(s.graph.cut_size(&s.partition), s.graph.edge_count());
        }
    }

    #[test]
    fn forced_cap_keeps_invariants() {
        let cfg = PipelineConfig {
            defect: HighDensityConfig::new(8, 0.3).with_cap(1),
            max_imbalance: Some(2),
        };
        let mut r = rng(6);
        let table = ImbalanceTable::build(&cfg, 0.2, 0.2, &mut r).unwrap();
        for _ in 0..50 {
            sample_high(&cfg, &table, 0.1, &mut r).unwrap().check().unwrap();
        }
    }

    #[test]
    fn independence_check_rejects_adjacent_pairs() {
        let part = Partition::canonical(4, 2);
        let s = Graph::from_edges(4, [(0, 1)]).unwrap();
        assert!(crossing_is_independent(&part, &s, &[EdgeId::between(0, 2), EdgeId::between(1, 3)]));
        assert!(!crossing_is_independent(&part, &s, &[EdgeId::between(0, 2), EdgeId::between(1, 2)]));
    }

    #[test]
    fn count_low_small_cases() {
        let mut r = rng(7);
        assert_eq!(count_low(&LowDensityConfig::new(6, 0.0), 0.05, 0.1, &mut r).unwrap(), LogEstimate::exact(0.0));
        let p = 0.2f64;
        let est = count_low(&LowDensityConfig::new(3, p), 0.05, 0.1, &mut r).unwrap();
        assert!(est.contains((1.0 - p.powi(3)).ln()), "{}", est.log_value);
    }

    #[test]
    fn count_low_matches_oracle_at_five() {
        let p = 0.2f64;
        let truth = Oracle::default().exact_mu(5, &p).unwrap().ln();
        let est = count_low(&LowDensityConfig::new(5, p), 0.05, 0.1, &mut rng(8)).unwrap();
        assert!(est.contains(truth), "{} vs {truth}", est.log_value);
    }
}
