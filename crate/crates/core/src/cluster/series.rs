//! Truncated cluster-expansion series with tail certificates.
//!
//! Clusters with the same set of distinct vertices `W` and the same
//! multiplicities `m` share one Ursell value, and there are `|Γ|!/Π m_w!` of
//! them. So the series is summed per `(W, m)`: the term is
//! `c(H_{W,m}) / Π m_w! · λ^{Σ m}` where `H_{W,m}` replaces each `w` by a clique
//! of `m_w` positions and `c` is the connected signed sum.

use std::f64::consts::E;

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph};
use crate::host::{HostGraph, ProductGraphView};
use crate::partition::{Partition, Side};
use crate::scalar::Scalar;

use super::enumerate::SetEnumerator;
use super::ursell::{IncompatibilityGraph, UrsellCache};

/// Cluster-expansion partial sum up to order `k` with a bound on the omitted tail.
#[derive(Debug, Clone)]
pub struct TruncatedSeries<S> {
    pub order: usize,
    /// `coefficients[j]` multiplies `λ^j`.
    pub coefficients: Vec<BigRational>,
    pub partial_sum: S,
    /// Bound on the absolute value of the omitted terms; meaningful only
    /// when `certified`.
    pub tail_bound: f64,
    /// `λ ≤ 1/(2e(Δ+1))` for the relevant host.
    pub certified: bool,
    pub max_degree: usize,
}

impl<S: Scalar> TruncatedSeries<S> {
    pub fn value(&self) -> f64 {
        self.partial_sum.to_f64_lossy()
    }

    /// Whether `x` lies within the tail bound of the partial sum.
    pub fn covers(&self, x: f64) -> bool {
        (x - self.value()).abs() <= self.tail_bound * (1.0 + 1e-9) + 1e-12
    }

    pub fn upper(&self) -> f64 {
        self.value() + self.tail_bound
    }

    pub fn lower(&self) -> f64 {
        self.value() - self.tail_bound
    }
}

/// `λ ≤ 1/(2e(Δ+1))`.
pub fn in_cluster_regime(lambda: f64, max_degree: usize) -> bool {
    lambda <= 1.0 / (2.0 * E * (max_degree as f64 + 1.0))
}

fn factorial(k: usize) -> i128 {
    (1..=k as i128).product()
}

/// Adjacency among the members of `set`, as bitmasks over positions in `set`.
fn set_adjacency<H: HostGraph + ?Sized>(host: &H, set: &[usize]) -> Vec<u32> {
    set.iter()
        .map(|&a| {
            let mut m = 0u32;
            host.for_each_neighbor(a, |z| {
                if let Some(j) = set.iter().position(|&w| w == z) {
                    m |= 1 << j;
                }
            });
            m
        })
        .collect()
}

fn blowup(adj: &[u32], mult: &[usize]) -> IncompatibilityGraph {
    let mut start = Vec::with_capacity(mult.len());
    let mut total = 0;
    for &m in mult {
        start.push(total);
        total += m;
    }
    let block = |i: usize| ((1u32 << mult[i]) - 1) << start[i];
    let mut masks = vec![0u32; total];
    for i in 0..mult.len() {
        let mut m = block(i);
        for j in 0..mult.len() {
            if adj[i] >> j & 1 == 1 {
                m |= block(j);
            }
        }
        for p in start[i]..start[i] + mult[i] {
            masks[p] = m & !(1 << p);
        }
    }
    IncompatibilityGraph::from_masks(masks)
}

/// Calls `f` on every multiplicity vector with entries ≥ 1 and total ≤ `k`.
fn for_each_multiplicity<F: FnMut(&[usize], usize)>(len: usize, k: usize, mut f: F) {
    if len == 0 || len > k {
        return;
    }
    let mut m = vec![1usize; len];
    loop {
        let total: usize = m.iter().sum();
        f(&m, total);
        // odometer with a total budget
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if m.iter().sum::<usize>() < k {
                m[i] += 1;
                break;
            }
            m[i] = 1;
        }
    }
}

/// Adds `Σ_m c(H_{W,m})·k!/Π m!` into `acc[Σm]` for one vertex set.
fn add_set_terms(adj: &[u32], k: usize, cache: &mut UrsellCache, acc: &mut [i128], abs: bool) {
    let kf = factorial(k);
    for_each_multiplicity(adj.len(), k, |m, total| {
        let c = cache.signed_sum(&blowup(adj, m)) as i128;
        let c = if abs { c.abs() } else { c };
        let denom: i128 = m.iter().map(|&x| factorial(x)).product();
        acc[total] += c * (kf / denom);
    });
}

/// Adds the difference `c(H¹) − c(H⁰)` for the same `(W, m)` on two hosts.
fn add_set_differences(
    adj1: &[u32],
    adj0: &[u32],
    k: usize,
    cache: &mut UrsellCache,
    acc: &mut [i128],
) {
    let kf = factorial(k);
    for_each_multiplicity(adj1.len(), k, |m, total| {
        let c1 = cache.signed_sum(&blowup(adj1, m)) as i128;
        let c0 = cache.signed_sum(&blowup(adj0, m)) as i128;
        if c1 != c0 {
            let denom: i128 = m.iter().map(|&x| factorial(x)).product();
            acc[total] += (c1 - c0) * (kf / denom);
        }
    });
}

fn to_coefficients(acc: &[i128], k: usize) -> Vec<BigRational> {
    let kf = BigInt::from(factorial(k));
    acc.iter()
        .map(|&a| BigRational::new(BigInt::from(a), kf.clone()))
        .collect()
}

fn evaluate<S: Scalar>(coefficients: &[BigRational], lambda: &S) -> S {
    coefficients
        .iter()
        .enumerate()
        .rev()
        .fold(S::zero(), |acc, (_, c)| acc * lambda.clone() + S::from_rational(c))
}

fn sum_acc(mut a: Vec<i128>, b: Vec<i128>) -> Vec<i128> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Coefficients of `log Z_host(λ)` up to `λ^k`, exact.
pub fn log_z_coefficients<H: HostGraph + ?Sized>(host: &H, k: usize) -> Vec<BigRational> {
    assert!((1..=12).contains(&k), "truncation order out of range");
    let acc = (0..host.vertex_count())
        .into_par_iter()
        .map_init(
            || (SetEnumerator::new(host), UrsellCache::new()),
            |(en, cache), root| {
                let mut acc = vec![0i128; k + 1];
                en.for_each_connected_set(root, root, k, |set| {
                    add_set_terms(&set_adjacency(host, set), k, cache, &mut acc, false);
                });
                acc
            },
        )
        .reduce(|| vec![0i128; k + 1], sum_acc);
    to_coefficients(&acc, k)
}

/// Order-`k` truncation of the cluster expansion of `log Z_host(λ)`.
///
/// The tail bound sums the single-vertex pivot bound over all vertices,
/// `n·(2e)^{k+1}·max(Δ,1)^k·λ^{k+1}`; the `max` keeps the bound valid on
/// edgeless hosts, where the repeated-vertex clusters still contribute.
pub fn truncated_log_z<S: Scalar, H: HostGraph + ?Sized>(
    host: &H,
    lambda: &S,
    k: usize,
) -> TruncatedSeries<S> {
    let coefficients = log_z_coefficients(host, k);
    let partial_sum = evaluate(&coefficients, lambda);
    let delta = host.max_degree();
    let l = lambda.to_f64_lossy().abs();
    let tail_bound = host.vertex_count() as f64
        * (2.0 * E).powi(k as i32 + 1)
        * (delta.max(1) as f64).powi(k as i32)
        * l.powi(k as i32 + 1);
    TruncatedSeries {
        order: k,
        coefficients,
        partial_sum,
        tail_bound,
        certified: in_cluster_regime(l, delta),
        max_degree: delta,
    }
}

/// Product-graph vertex pairs `{(u,x),(v,x)}` created by the intra-part pair
/// `e = uv`, in order of `x`.
pub fn e_pairs(part: &Partition, e: EdgeId) -> Vec<(usize, usize)> {
    let (_, nb) = part.sizes();
    let (pu, pv) = (part.position(e.i()), part.position(e.j()));
    match part.side(e.i()) {
        Side::A => (0..nb).map(|x| (pu * nb + x, pv * nb + x)).collect(),
        Side::B => (0..part.sizes().0)
            .map(|x| (x * nb + pu, x * nb + pv))
            .collect(),
    }
}

fn check_intra(part: &Partition, g: &Graph, e: EdgeId) -> Result<()> {
    if e.j() >= part.n() || !part.same_side(e.i(), e.j()) {
        return Err(Error::contract(format!("{e:?} is not inside a part")));
    }
    if g.contains(e) {
        return Err(Error::contract(format!("{e:?} is already a defect edge")));
    }
    Ok(())
}

fn with_edges(g: &Graph, extra: &[EdgeId]) -> Graph {
    let mut h = g.clone();
    for &e in extra {
        h.insert(e);
    }
    h
}

/// Order-`k` truncation of `log(Z_{(G∪e)□}(λ)/Z_{G□}(λ))` for the defect
/// graph `G` held by `view`.
///
/// Clusters of `G□` containing both ends of some `e`-pair do not survive in
/// `(G∪e)□` unchanged, so the series sums `c(H¹) − c(H⁰)` over vertex sets
/// that contain an `e`-pair and are connected in `(G∪e)□`. The size-two part
/// is `−λ²·(number of e-pairs)`. The tail applies the two-vertex pivot bound
/// at every `e`-pair on both hosts.
pub fn truncated_log_ratio<S: Scalar>(
    view: &ProductGraphView<'_>,
    e: EdgeId,
    lambda: &S,
    k: usize,
) -> Result<TruncatedSeries<S>> {
    let part = view.partition();
    let g0 = view.defects();
    check_intra(part, g0, e)?;
    assert!((2..=12).contains(&k), "ratio series needs order at least 2");
    let g1 = with_edges(g0, &[e]);
    let host1 = ProductGraphView::new(part, &g1);
    let host0 = *view;
    let pairs = e_pairs(part, e);

    let acc = (0..pairs.len())
        .into_par_iter()
        .map_init(
            || (SetEnumerator::new(&host1), UrsellCache::new()),
            |(en, cache), b| {
                let mut acc = vec![0i128; k + 1];
                let (x, y) = pairs[b];
                en.for_each_connected_set(x, 0, k, |set| {
                    let has = |p: &(usize, usize)| set.contains(&p.0) && set.contains(&p.1);
                    if !set.contains(&y) || pairs[..b].iter().any(has) {
                        return;
                    }
                    let adj1 = set_adjacency(&host1, set);
                    let adj0 = set_adjacency(&host0, set);
                    add_set_differences(&adj1, &adj0, k, cache, &mut acc);
                });
                acc
            },
        )
        .reduce(|| vec![0i128; k + 1], sum_acc);
    let coefficients = to_coefficients(&acc, k);
    let partial_sum = evaluate(&coefficients, lambda);

    let d1 = host1.max_degree();
    let d0 = host0.max_degree();
    let l = lambda.to_f64_lossy().abs();
    let per_pivot = |d: usize| (d as f64).powi(k as i32 - 1);
    let tail_bound = pairs.len() as f64
        * (2.0 * E).powi(k as i32 + 1)
        * l.powi(k as i32 + 1)
        * (per_pivot(d1) + per_pivot(d0));
    Ok(TruncatedSeries {
        order: k,
        coefficients,
        partial_sum,
        tail_bound,
        certified: in_cluster_regime(l, d1),
        max_degree: d1,
    })
}

/// Computed form of the cluster sum that controls how much the marginal of
/// `e` moves when `f` is added: `Σ |φ(Γ)| λ^{|Γ|}` over clusters containing
/// both an `e`-pair and an `f`-pair, on `(G∪e)□` and on `(G∪e∪f)□`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairClusterMass {
    pub partial: f64,
    pub tail: f64,
    pub certified: bool,
}

impl PairClusterMass {
    pub fn bound(&self) -> f64 {
        self.partial + self.tail
    }
}

fn pair_mass_on<H: HostGraph>(
    host: &H,
    epairs: &[(usize, usize)],
    fpairs: &[(usize, usize)],
    lambda: f64,
    k: usize,
) -> (f64, f64, usize) {
    let acc = (0..epairs.len())
        .into_par_iter()
        .map_init(
            || (SetEnumerator::new(host), UrsellCache::new()),
            |(en, cache), b| {
                let mut acc = vec![0i128; k + 1];
                let (x, y) = epairs[b];
                en.for_each_connected_set(x, 0, k, |set| {
                    let has = |p: &(usize, usize)| set.contains(&p.0) && set.contains(&p.1);
                    if !set.contains(&y) || epairs[..b].iter().any(has) || !fpairs.iter().any(has) {
                        return;
                    }
                    add_set_terms(&set_adjacency(host, set), k, cache, &mut acc, true);
                });
                acc
            },
        )
        .reduce(|| vec![0i128; k + 1], sum_acc);
    let kf = factorial(k) as f64;
    let partial = acc
        .iter()
        .enumerate()
        .map(|(j, &a)| a as f64 / kf * lambda.powi(j as i32))
        .sum();
    let d = host.max_degree();
    let tail = epairs.len() as f64
        * (2.0 * E).powi(k as i32 + 1)
        * (d as f64).powi(k as i32 - 1)
        * lambda.powi(k as i32 + 1);
    (partial, tail, d)
}

/// Truncated `Σ|φ|λ^{|Γ|}` over clusters holding an `e`-pair and an
/// `f`-pair, on both `(G∪e)□` and `(G∪e∪f)□`, plus the pivot tail bound.
pub fn pair_cluster_mass(
    view: &ProductGraphView<'_>,
    e: EdgeId,
    f: EdgeId,
    lambda: f64,
    k: usize,
) -> Result<PairClusterMass> {
    let part = view.partition();
    let g = view.defects();
    check_intra(part, g, e)?;
    check_intra(part, g, f)?;
    if e == f {
        return Err(Error::contract("pair cluster mass needs e ≠ f"));
    }
    assert!((2..=12).contains(&k));
    let epairs = e_pairs(part, e);
    let fpairs = e_pairs(part, f);
    let ge = with_edges(g, &[e]);
    let gef = with_edges(g, &[e, f]);
    let he = ProductGraphView::new(part, &ge);
    let hef = ProductGraphView::new(part, &gef);
    let (p1, t1, d1) = pair_mass_on(&he, &epairs, &fpairs, lambda, k);
    let (p2, t2, d2) = pair_mass_on(&hef, &epairs, &fpairs, lambda, k);
    Ok(PairClusterMass {
        partial: p1 + p2,
        tail: t1 + t2,
        certified: in_cluster_regime(lambda, d1.max(d2)),
    })
}
