//! Experiment runners: mixing-time measurement, the path-coupling
//! contraction sweep and the slow-mixing demonstration.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use trifree::glauber_low::{
    apply_update, estimate_contraction, glauber_step, ChainState, LowDensityConfig,
};
use trifree::graph::EdgeIndexer;
use trifree::oracle::{tv_to_histogram, Histogram, Oracle};
use trifree::pipeline::{sample_high, ImbalanceTable, PipelineConfig};
use trifree::rng::Streams;
use trifree::{Graph, Partition, Side};

/// Largest `n` for which the mixing experiment compares against the oracle.
pub const ORACLE_MAX_N: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingPoint {
    pub steps: u64,
    pub tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingSummary {
    pub pairs: usize,
    pub coalesced: usize,
    pub mean_steps: f64,
    pub median_steps: u64,
    pub max_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum MixingReport {
    /// TV between the empirical `t`-step law from the empty graph and the
    /// exact measure.
    Oracle { points: Vec<MixingPoint> },
    /// Coalescence of a chain from the empty graph with one from a complete
    /// bipartite graph under shared randomness.
    Coupling {
        summary: CouplingSummary,
        times: Vec<Option<u64>>,
    },
}

/// Geometric grid `0, 1, 2, 4, …` capped by `2·K·n²·ln n`, endpoint included.
pub fn default_grid(cfg: &LowDensityConfig) -> Vec<u64> {
    let n = cfg.n as f64;
    let top = (2.0 * cfg.burn_in_k * n * n * n.ln().max(1.0)).ceil() as u64;
    let mut grid = vec![0];
    let mut t = 1;
    while t < top {
        grid.push(t);
        t *= 2;
    }
    grid.push(top);
    grid
}

/// Empirical TV decay against the oracle for small `n`, coupling times
/// otherwise. Chain `i` draws from stream `("mix-time", i)`.
pub fn run_mixing_experiment(
    cfg: &LowDensityConfig,
    grid: &[u64],
    samples: usize,
    max_steps: u64,
    streams: &Streams,
) -> trifree::Result<MixingReport> {
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let pairs = EdgeIndexer::new(cfg.n);
    if cfg.n <= ORACLE_MAX_N {
        let exact = Oracle::default().exact_mu_distribution(cfg.n, &cfg.p)?;
        let snaps: Vec<Vec<u64>> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = streams.rng("mix-time", i as u64, "chain");
                let mut s = ChainState::empty(cfg.n, i as u64);
                let mut out = Vec::with_capacity(grid.len());
                for &t in &grid {
                    while s.step < t {
                        glauber_step(&mut s, &pairs, cfg.p, &mut rng);
                    }
                    out.push(s.graph.edge_mask());
                }
                out
            })
            .collect();
        let points = grid
            .iter()
            .enumerate()
            .map(|(g, &steps)| {
                let mut h = Histogram::new();
                for s in &snaps {
                    h.add(s[g]);
                }
                MixingPoint {
                    steps,
                    tv: tv_to_histogram(&exact, &h),
                }
            })
            .collect();
        return Ok(MixingReport::Oracle { points });
    }
    let half = Partition::canonical(cfg.n, cfg.n / 2);
    let times: Vec<Option<u64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.rng("mix-time", i as u64, "coupling");
            let mut x = Graph::empty(cfg.n);
            let mut y = Graph::complete_bipartite(&half);
            for t in 1..=max_steps {
                let e = pairs.get(rng.gen_range(0..pairs.len()));
                let u: f64 = rng.gen();
                apply_update(&mut x, e, u, cfg.p);
                apply_update(&mut y, e, u, cfg.p);
                if x == y {
                    return Some(t);
                }
            }
            None
        })
        .collect();
    let mut done: Vec<u64> = times.iter().flatten().copied().collect();
    done.sort_unstable();
    let summary = CouplingSummary {
        pairs: samples,
        coalesced: done.len(),
        mean_steps: if done.is_empty() {
            f64::NAN
        } else {
            done.iter().sum::<u64>() as f64 / done.len() as f64
        },
        median_steps: done.get(done.len() / 2).copied().unwrap_or(0),
        max_steps: done.last().copied().unwrap_or(0),
    };
    Ok(MixingReport::Coupling { summary, times })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionRow {
    pub p: f64,
    pub trials: usize,
    pub mean_distance: f64,
    pub std_error: f64,
    pub mean_expected_distance: f64,
    pub expected_std_error: f64,
    pub bound: f64,
    pub rejected: usize,
}

/// One-step contraction of the path coupling for `p = c/√n` over `cs`.
pub fn run_contraction_sweep(
    base: &LowDensityConfig,
    cs: &[f64],
    trials: usize,
    streams: &Streams,
) -> trifree::Result<Vec<ContractionRow>> {
    cs.par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let cfg = LowDensityConfig {
                p: c / (base.n as f64).sqrt(),
                ..*base
            };
            let mut rng = streams.rng("contraction", i as u64, "pairs");
            let est = estimate_contraction(&cfg, trials, 0.05, &mut rng)?;
            Ok(ContractionRow {
                p: cfg.p,
                trials: est.trials,
                mean_distance: est.mean_distance,
                std_error: est.std_error,
                mean_expected_distance: est.mean_expected_distance,
                expected_std_error: est.expected_std_error,
                bound: est.bound,
                rejected: est.rejected,
            })
        })
        .collect()
}

/// Minimum-degree and sampled set-pair checks of the `(A,B)`-`λ`-expander
/// property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpanderReport {
    pub lambda: f64,
    /// `λn/30`.
    pub degree_threshold: f64,
    /// `min_{v∈A} d(v,B)`.
    pub min_degree_a: usize,
    /// `min_{v∈B} d(v,A)`.
    pub min_degree_b: usize,
    pub degree_ok: bool,
    pub pairs_checked: usize,
    pub pairs_failed: usize,
    /// Smallest `|E(X,Y)| / (λ|X||Y|/10)` among the sampled pairs.
    pub min_pair_ratio: f64,
    pub sets_ok: bool,
}

impl ExpanderReport {
    pub fn is_expander(&self) -> bool {
        self.degree_ok && self.sets_ok
    }
}

fn cross_degree(g: &Graph, part: &Partition, v: usize) -> usize {
    g.neighbors(v).filter(|&w| !part.same_side(v, w)).count()
}

fn edges_between(g: &Graph, x: &[usize], y: &[usize]) -> usize {
    let words = g.row(0).len();
    let mut mask = vec![0u64; words];
    for &b in y {
        mask[b / 64] |= 1 << (b % 64);
    }
    x.iter()
        .map(|&a| {
            g.row(a)
                .iter()
                .zip(&mask)
                .map(|(r, m)| (r & m).count_ones() as usize)
                .sum::<usize>()
        })
        .sum()
}

/// Checks the degree condition exactly and the set-pair condition on `pairs`
/// random pairs `X ⊆` one part with `|X| ≥ λn/100`, `Y ⊆` the other with
/// `|Y| ≥ n/6`, alternating which part plays `X`.
pub fn expander_report<R: Rng + ?Sized>(
    g: &Graph,
    part: &Partition,
    lambda: f64,
    pairs: usize,
    rng: &mut R,
) -> ExpanderReport {
    let n = part.n() as f64;
    let degree_threshold = lambda * n / 30.0;
    let min_deg = |s: Side| {
        part.members(s)
            .iter()
            .map(|&v| cross_degree(g, part, v))
            .min()
            .unwrap_or(0)
    };
    let (min_degree_a, min_degree_b) = (min_deg(Side::A), min_deg(Side::B));
    let degree_ok = min_degree_a as f64 >= degree_threshold && min_degree_b as f64 >= degree_threshold;
    let x_min = ((lambda * n / 100.0).ceil() as usize).max(1);
    let y_min = ((n / 6.0).ceil() as usize).max(1);
    let mut checked = 0;
    let mut failed = 0;
    let mut min_ratio = f64::INFINITY;
    for k in 0..pairs {
        let (xs, ys) = if k % 2 == 0 {
            (part.members(Side::A), part.members(Side::B))
        } else {
            (part.members(Side::B), part.members(Side::A))
        };
        if xs.len() < x_min || ys.len() < y_min {
            continue;
        }
        let sx = rng.gen_range(x_min..=xs.len());
        let sy = rng.gen_range(y_min..=ys.len());
        let x: Vec<usize> = sample_indices(rng, xs.len(), sx).into_iter().map(|i| xs[i]).collect();
        let y: Vec<usize> = sample_indices(rng, ys.len(), sy).into_iter().map(|i| ys[i]).collect();
        let need = lambda * (sx * sy) as f64 / 10.0;
        let have = edges_between(g, &x, &y) as f64;
        checked += 1;
        min_ratio = min_ratio.min(have / need);
        if have < need {
            failed += 1;
        }
    }
    ExpanderReport {
        lambda,
        degree_threshold,
        min_degree_a,
        min_degree_b,
        degree_ok,
        pairs_checked: checked,
        pairs_failed: failed,
        min_pair_ratio: if checked == 0 { f64::NAN } else { min_ratio },
        sets_ok: failed == 0,
    }
}

/// Fraction of edges crossing the reference partition; zero without edges.
pub fn alignment(g: &Graph, part: &Partition) -> f64 {
    match g.edge_count() {
        0 => 0.0,
        m => g.cut_size(part) as f64 / m as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BottleneckTrace {
    pub p: f64,
    pub interval: u64,
    /// `cut_size` at each trace point, the start included.
    pub cut_size: Vec<usize>,
    pub edges: Vec<usize>,
    pub alignment: Vec<f64>,
    /// Smallest alignment after the start.
    pub alignment_min: f64,
    pub alignment_final: f64,
    /// Steps at which the alignment crossed 1/2 in either direction.
    pub flips: Vec<u64>,
}

/// Runs the constrained chain from `start` at `p` for `steps`, recording the
/// cut observable every `interval` steps.
pub fn bottleneck_trace<R: Rng + ?Sized>(
    start: &Graph,
    part: &Partition,
    p: f64,
    steps: u64,
    interval: u64,
    rng: &mut R,
) -> BottleneckTrace {
    let pairs = EdgeIndexer::new(part.n());
    let interval = interval.max(1);
    let mut s = ChainState {
        graph: start.clone(),
        step: 0,
        stream: 0,
    };
    let mut cut_size = vec![start.cut_size(part)];
    let mut edges = vec![start.edge_count()];
    let mut align = vec![alignment(start, part)];
    let mut flips = Vec::new();
    while s.step < steps {
        let chunk = interval.min(steps - s.step);
        for _ in 0..chunk {
            glauber_step(&mut s, &pairs, p, rng);
        }
        let a = alignment(&s.graph, part);
        if (a >= 0.5) != (*align.last().unwrap() >= 0.5) {
            flips.push(s.step);
        }
        cut_size.push(s.graph.cut_size(part));
        edges.push(s.graph.edge_count());
        align.push(a);
    }
    let alignment_min = align[1..].iter().copied().fold(f64::INFINITY, f64::min);
    BottleneckTrace {
        p,
        interval,
        alignment_final: *align.last().unwrap(),
        alignment_min: if align.len() > 1 { alignment_min } else { align[0] },
        cut_size,
        edges,
        alignment: align,
        flips,
    }
}

/// Sample autocorrelation of `xs` at lags `0..=max_lag`.
pub fn autocorrelation(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![1.0];
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    (0..=max_lag.min(n - 1))
        .map(|k| {
            if var == 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            let c = (0..n - k).map(|i| (xs[i] - mean) * (xs[i + k] - mean)).sum::<f64>() / n as f64;
            c / var
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlowMixParams {
    pub n: usize,
    pub lambda: f64,
    pub control_p: f64,
    pub steps: u64,
    pub runs: usize,
    pub interval: u64,
    pub control_steps: u64,
    pub control_interval: u64,
    /// Lag budget for the control chain to decorrelate.
    pub control_lag_budget: u64,
    pub empty_start: bool,
    pub expander_pairs: usize,
}

impl SlowMixParams {
    pub fn new(n: usize) -> Self {
        let r = (n as f64).sqrt();
        Self {
            n,
            lambda: 5.0 / r,
            control_p: 0.3 / r,
            steps: 10_000_000,
            runs: 10,
            interval: 10_000,
            control_steps: 4_000_000,
            control_interval: 1_000,
            control_lag_budget: 1_000_000,
            empty_start: false,
            expander_pairs: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlSummary {
    pub trace: BottleneckTrace,
    /// Autocorrelation of the cut fraction over the second half of the run,
    /// one entry per trace interval.
    pub autocorrelation: Vec<f64>,
    /// First lag (in steps) with autocorrelation below 0.1.
    pub decorrelation_steps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlowMixReport {
    pub params: SlowMixParams,
    pub partitions: Vec<(usize, usize)>,
    pub expander: Vec<ExpanderReport>,
    pub demo: Vec<BottleneckTrace>,
    pub control: ControlSummary,
}

impl SlowMixReport {
    /// Runs whose alignment never dropped below `threshold`.
    pub fn runs_aligned(&self, threshold: f64) -> usize {
        self.demo.iter().filter(|t| t.alignment_min >= threshold).count()
    }
}

/// Demonstration chains at `p = λ/(1+λ)` from pipeline samples aligned with
/// their partition, and one control chain at a subcritical `p`.
pub fn run_slow_mix_demo(
    params: &SlowMixParams,
    pipeline: &PipelineConfig,
    streams: &Streams,
) -> trifree::Result<SlowMixReport> {
    let n = params.n;
    let lambda = params.lambda;
    let p = lambda / (1.0 + lambda);
    let mut table_rng = streams.rng("slow-mix", 0, "table");
    let table = ImbalanceTable::build(pipeline, 0.05, 0.1, &mut table_rng)?;
    let starts: Vec<(Graph, Partition)> = (0..params.runs.max(1))
        .map(|r| {
            let mut rng = streams.rng("slow-mix", r as u64, "start");
            if params.empty_start {
                Ok((Graph::empty(n), Partition::canonical(n, n / 2)))
            } else {
                let s = sample_high(pipeline, &table, 0.05, &mut rng)?;
                Ok((s.graph, s.partition))
            }
        })
        .collect::<trifree::Result<_>>()?;
    let expander = starts
        .iter()
        .enumerate()
        .map(|(r, (g, part))| {
            let mut rng = streams.rng("slow-mix", r as u64, "expander");
            expander_report(g, part, lambda, params.expander_pairs, &mut rng)
        })
        .collect();
    let demo = starts
        .par_iter()
        .take(params.runs)
        .enumerate()
        .map(|(r, (g, part))| {
            let mut rng = streams.rng("slow-mix", r as u64, "demo");
            bottleneck_trace(g, part, p, params.steps, params.interval, &mut rng)
        })
        .collect();

    let (g0, part0) = &starts[0];
    let mut rng = streams.rng("slow-mix", 0, "control");
    let trace = bottleneck_trace(g0, part0, params.control_p, params.control_steps, params.control_interval, &mut rng);
    let fractions: Vec<f64> = trace
        .cut_size
        .iter()
        .zip(&trace.edges)
        .map(|(&c, &m)| if m == 0 { 0.0 } else { c as f64 / m as f64 })
        .collect();
    let tail = &fractions[fractions.len() / 2..];
    let max_lag = (params.control_lag_budget / trace.interval) as usize;
    let acf = autocorrelation(tail, max_lag);
    let decorrelation_steps = acf
        .iter()
        .position(|&a| a < 0.1)
        .map(|k| k as u64 * trace.interval);
    Ok(SlowMixReport {
        params: *params,
        partitions: starts.iter().map(|(_, p)| p.sizes()).collect(),
        expander,
        demo,
        control: ControlSummary {
            trace,
            autocorrelation: acf,
            decorrelation_steps,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use trifree::rng::ChainRng;

    #[test]
    fn zero_steps_tv_is_point_mass_distance() {
        let cfg = LowDensityConfig::new(5, 0.2);
        let rep = run_mixing_experiment(&cfg, &[0], 200, 0, &Streams::new(1)).unwrap();
        let MixingReport::Oracle { points } = rep else {
            panic!("expected oracle mode")
        };
        let exact = Oracle::default().exact_mu_distribution(5, &0.2f64).unwrap();
        assert!((points[0].tv - (1.0 - exact.prob(0))).abs() < 1e-12);
    }

    #[test]
    fn coupling_mode_coalesces() {
        let cfg = LowDensityConfig::new(12, 0.1);
        let rep = run_mixing_experiment(&cfg, &[], 8, 2_000_000, &Streams::new(2)).unwrap();
        let MixingReport::Coupling { summary, .. } = rep else {
            panic!("expected coupling mode")
        };
        assert_eq!(summary.coalesced, 8);
    }

    #[test]
    fn expander_thresholds() {
        let part = Partition::canonical(12, 6);
        let full = Graph::complete_bipartite(&part);
        let mut rng = ChainRng::seed_from_u64(3);
        let r = expander_report(&full, &part, 0.5, 50, &mut rng);
        assert!(r.is_expander());
        assert_eq!(r.min_degree_a, 6);
        assert!((r.degree_threshold - 0.2).abs() < 1e-12);
        let r = expander_report(&Graph::empty(12), &part, 0.5, 50, &mut rng);
        assert!(!r.degree_ok && !r.sets_ok);
    }

    #[test]
    fn empty_start_trace_is_recorded() {
        let part = Partition::canonical(20, 10);
        let mut rng = ChainRng::seed_from_u64(4);
        let t = bottleneck_trace(&Graph::empty(20), &part, 0.5, 10_000, 1000, &mut rng);
        assert_eq!(t.alignment.len(), 11);
        assert!(t.alignment.iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn autocorrelation_of_alternating_series() {
        let xs: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let a = autocorrelation(&xs, 2);
        assert!((a[0] - 1.0).abs() < 1e-12);
        assert!(a[1] < -0.95);
        assert!(a[2] > 0.95);
    }
}
