//! Brute-force ground truth at small sizes.
//!
//! Every stochastic routine in the crate is checked against these exact
//! enumerations. Weights are kept as integer-coefficient polynomials in the
//! activity so the same enumeration can be evaluated in `f64` or exactly in
//! rationals.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::graph::{pair_count, EdgeId, Graph};
use crate::host::{AdjGraph, HostGraph, ProductGraphView};
use crate::partition::{Partition, Side};
use crate::poly::Polynomial;
use crate::scalar::Scalar;

/// Enumeration budgets. Anything larger is refused so callers fall back to
/// estimators instead of hanging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Oracle {
    /// Largest vertex count for enumerating graphs on `[n]`.
    pub max_graph_vertices: usize,
    /// Largest host for independent-set enumeration.
    pub max_host_vertices: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Self {
            max_graph_vertices: 7,
            max_host_vertices: 24,
        }
    }
}

/// Probability distribution over integer-encoded states.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution<S> {
    probs: BTreeMap<u64, S>,
}

impl<S: Scalar> ExactDistribution<S> {
    /// Normalizes nonnegative weights; repeated states are merged.
    pub fn from_weights<I: IntoIterator<Item = (u64, S)>>(weights: I) -> Self {
        let mut probs: BTreeMap<u64, S> = BTreeMap::new();
        for (state, w) in weights {
            let slot = probs.entry(state).or_insert_with(S::zero);
            *slot = slot.clone() + w;
        }
        let total = probs.values().fold(S::zero(), |a, w| a + w.clone());
        for w in probs.values_mut() {
            *w = w.clone() / total.clone();
        }
        Self { probs }
    }

    pub fn point_mass(state: u64) -> Self {
        Self::from_weights([(state, S::one())])
    }

    pub fn prob(&self, state: u64) -> S {
        self.probs.get(&state).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &S)> {
        self.probs.iter().map(|(&k, v)| (k, v))
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn total(&self) -> S {
        self.probs.values().fold(S::zero(), |a, w| a + w.clone())
    }

    pub fn expectation<F: Fn(u64) -> S>(&self, f: F) -> S {
        self.probs
            .iter()
            .fold(S::zero(), |acc, (&k, p)| acc + f(k) * p.clone())
    }

    /// Pushes the distribution forward along `f`.
    pub fn map_states<F: Fn(u64) -> u64>(&self, f: F) -> Self {
        Self::from_weights(self.probs.iter().map(|(&k, p)| (f(k), p.clone())))
    }

    pub fn to_f64(&self) -> ExactDistribution<f64> {
        ExactDistribution {
            probs: self.probs.iter().map(|(&k, p)| (k, p.to_f64_lossy())).collect(),
        }
    }

    /// Writes `state_encoding,probability` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["state_encoding", "probability"])
            .map_err(csv_err)?;
        for (k, p) in &self.probs {
            out.write_record([k.to_string(), format!("{:.17e}", p.to_f64_lossy())])
                .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

impl ExactDistribution<f64> {
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut probs = BTreeMap::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let parse_err = |m: String| Error::Parse {
                line: line + 2,
                message: m,
            };
            let state: u64 = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err("bad state".into()))?;
            let p: f64 = rec
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err("bad probability".into()))?;
            probs.insert(state, p);
        }
        Ok(Self { probs })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Empirical counts over integer-encoded states.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Histogram {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, state: u64) {
        *self.counts.entry(state).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (&k, &c) in &other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, state: u64) -> u64 {
        self.counts.get(&state).copied().unwrap_or(0)
    }

    pub fn to_distribution(&self) -> ExactDistribution<f64> {
        ExactDistribution::from_weights(self.counts.iter().map(|(&k, &c)| (k, c as f64)))
    }
}

impl FromIterator<u64> for Histogram {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        let mut h = Histogram::new();
        for s in iter {
            h.add(s);
        }
        h
    }
}

/// `½ Σ |p(x) − q(x)|` over the union of supports.
pub fn tv_distance<S: Scalar>(p: &ExactDistribution<S>, q: &ExactDistribution<S>) -> S {
    let mut sum = S::zero();
    for (k, a) in p.iter() {
        sum = sum + (a.clone() - q.prob(k)).abs();
    }
    for (k, b) in q.iter() {
        if !p.probs.contains_key(&k) {
            sum = sum + b.abs();
        }
    }
    sum / S::from_u64_exact(2)
}

/// TV distance between an exact law and an empirical histogram.
pub fn tv_to_histogram(p: &ExactDistribution<f64>, h: &Histogram) -> f64 {
    tv_distance(p, &h.to_distribution())
}

/// Triangle-free graphs on `[n]` enumerated by extending edge sets in index
/// order, optionally with a maximum-degree bound. Only pairs accepted by
/// `allowed` are considered.
pub fn for_each_triangle_free<F, P>(n: usize, max_degree: Option<usize>, allowed: P, mut f: F)
where
    F: FnMut(&Graph),
    P: Fn(EdgeId) -> bool,
{
    let pairs: Vec<EdgeId> = (0..pair_count(n))
        .map(|k| EdgeId::from_index(k, n))
        .filter(|&e| allowed(e))
        .collect();
    let cap = max_degree.unwrap_or(usize::MAX);
    let mut g = Graph::empty(n);
    fn rec<F: FnMut(&Graph)>(g: &mut Graph, pairs: &[EdgeId], cap: usize, f: &mut F) {
        let Some((&e, rest)) = pairs.split_first() else {
            f(g);
            return;
        };
        rec(g, rest, cap, f);
        if g.degree(e.i()) < cap && g.degree(e.j()) < cap && !g.closes_triangle(e) {
            g.insert(e);
            rec(g, rest, cap, f);
            g.remove(e);
        }
    }
    rec(&mut g, &pairs, cap, &mut f);
}

/// Independent sets of a host (at most 64 vertices) as bit masks.
pub fn independent_sets(host: &AdjGraph) -> Vec<u64> {
    let masks = host.neighbor_masks();
    let v = host.vertex_count();
    let mut out = Vec::new();
    fn rec(k: usize, v: usize, masks: &[u64], cur: u64, blocked: u64, out: &mut Vec<u64>) {
        if k == v {
            out.push(cur);
            return;
        }
        rec(k + 1, v, masks, cur, blocked, out);
        if blocked >> k & 1 == 0 {
            rec(k + 1, v, masks, cur | 1 << k, blocked | masks[k], out);
        }
    }
    rec(0, v, &masks, 0, 0, &mut out);
    out
}

/// Independence polynomial `Σ_I x^{|I|}` of a host with at most 64 vertices.
pub fn independence_polynomial(host: &AdjGraph) -> Polynomial {
    let masks = host.neighbor_masks();
    let all = if host.vertex_count() == 64 {
        u64::MAX
    } else {
        (1u64 << host.vertex_count()) - 1
    };
    let mut memo = HashMap::new();
    independence_rec(all, &masks, &mut memo)
}

fn independence_rec(avail: u64, masks: &[u64], memo: &mut HashMap<u64, Polynomial>) -> Polynomial {
    if avail == 0 {
        return Polynomial::one();
    }
    if let Some(p) = memo.get(&avail) {
        return p.clone();
    }
    // vertices with no available neighbour contribute a factor (1+x) each
    let mut isolated = 0u64;
    let mut rest = avail;
    while rest != 0 {
        let v = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        if masks[v] & avail == 0 {
            isolated |= 1 << v;
        }
    }
    let out = if isolated != 0 {
        let inner = independence_rec(avail & !isolated, masks, memo);
        &inner * &Polynomial::binomial_power(isolated.count_ones() as usize)
    } else {
        let v = avail.trailing_zeros() as usize;
        let without = independence_rec(avail & !(1 << v), masks, memo);
        let with = independence_rec(avail & !(1 << v) & !masks[v], masks, memo);
        let mut p = &with * &Polynomial::monomial(1);
        p.add_assign(&without);
        p
    };
    memo.insert(avail, out.clone());
    out
}

/// Exact law of the defect pair `(S, T)` for one partition and degree cap,
/// stored as activity polynomials so it can be evaluated at any `λ`.
#[derive(Debug, Clone)]
pub struct DefectLaw {
    part: Partition,
    cap: usize,
    // (state mask over pairs of [n], |S|+|T|, independence polynomial of S□T)
    states: Vec<(u64, usize, Polynomial)>,
    index: HashMap<u64, usize>,
}

impl DefectLaw {
    pub fn partition(&self) -> &Partition {
        &self.part
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn support_len(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> impl Iterator<Item = u64> + '_ {
        self.states.iter().map(|s| s.0)
    }

    pub fn contains(&self, mask: u64) -> bool {
        self.index.contains_key(&mask)
    }

    /// `λ^{|S|+|T|} Z_{S□T}(λ)` as a polynomial in `λ`.
    pub fn weight_polynomial(&self, mask: u64) -> Option<Polynomial> {
        let &(_, size, ref z) = &self.states[*self.index.get(&mask)?];
        Some(z * &Polynomial::monomial(size))
    }

    /// `Zʷ_{A,B}` as a polynomial in `λ`.
    pub fn normalizer_polynomial(&self) -> Polynomial {
        let mut total = Polynomial::default();
        for &(_, size, ref z) in &self.states {
            total.add_assign(&(z * &Polynomial::monomial(size)));
        }
        total
    }

    pub fn weight<S: Scalar>(&self, mask: u64, lambda: &S) -> S {
        match self.index.get(&mask) {
            Some(&k) => {
                let (_, size, z) = &self.states[k];
                lambda.pow_u(*size) * z.eval(lambda)
            }
            None => S::zero(),
        }
    }

    pub fn normalizer<S: Scalar>(&self, lambda: &S) -> S {
        self.states
            .iter()
            .fold(S::zero(), |acc, (_, size, z)| acc + lambda.pow_u(*size) * z.eval(lambda))
    }

    pub fn distribution<S: Scalar>(&self, lambda: &S) -> ExactDistribution<S> {
        ExactDistribution::from_weights(
            self.states
                .iter()
                .map(|(m, size, z)| (*m, lambda.pow_u(*size) * z.eval(lambda))),
        )
    }

    /// `P(e ∈ (S,T) | the rest of the state)`; zero when adding `e` leaves the
    /// support.
    pub fn conditional_marginal<S: Scalar>(&self, mask: u64, e: EdgeId, lambda: &S) -> S {
        let bit = 1u64 << e.index(self.part.n());
        let with = self.weight(mask | bit, lambda);
        let without = self.weight(mask & !bit, lambda);
        if with.is_zero() {
            return S::zero();
        }
        with.clone() / (with + without)
    }
}

impl Oracle {
    fn check_graph_budget(&self, n: usize) -> Result<()> {
        if n > self.max_graph_vertices {
            return Err(Error::BudgetExceeded {
                what: "graph enumeration",
                size: n,
                budget: self.max_graph_vertices,
            });
        }
        Ok(())
    }

    fn check_host_budget(&self, v: usize) -> Result<()> {
        if v > self.max_host_vertices.min(64) {
            return Err(Error::BudgetExceeded {
                what: "independent-set enumeration",
                size: v,
                budget: self.max_host_vertices.min(64),
            });
        }
        Ok(())
    }

    /// Number of triangle-free graphs on `[n]` with each edge count, i.e.
    /// `Z(λ)` as a polynomial.
    pub fn triangle_free_polynomial(&self, n: usize) -> Result<Polynomial> {
        self.check_graph_budget(n)?;
        let mut p = Polynomial::default();
        for_each_triangle_free(n, None, |_| true, |g| p.add_term(g.edge_count(), 1));
        Ok(p)
    }

    /// `Z(λ) = Σ_{G triangle-free} λ^{|G|}`.
    pub fn exact_z<S: Scalar>(&self, n: usize, lambda: &S) -> Result<S> {
        Ok(self.triangle_free_polynomial(n)?.eval(lambda))
    }

    /// `μ_p(triangle-free) = Z(λ)(1−p)^{binom(n,2)}` with `λ = p/(1−p)`.
    pub fn exact_mu<S: Scalar>(&self, n: usize, p: &S) -> Result<S> {
        let q = S::one() - p.clone();
        let lambda = p.clone() / q.clone();
        Ok(self.exact_z(n, &lambda)? * q.pow_u(pair_count(n)))
    }

    /// The conditional law of `G(n,p)` given triangle-freeness over edge masks
    /// (requires `binom(n,2) ≤ 64`).
    pub fn exact_mu_distribution<S: Scalar>(&self, n: usize, p: &S) -> Result<ExactDistribution<S>> {
        self.check_graph_budget(n)?;
        let lambda = p.clone() / (S::one() - p.clone());
        let mut weights = Vec::new();
        for_each_triangle_free(n, None, |_| true, |g| {
            weights.push((g.edge_mask(), lambda.pow_u(g.edge_count())))
        });
        Ok(ExactDistribution::from_weights(weights))
    }

    pub fn independence_polynomial<H: HostGraph + ?Sized>(&self, host: &H) -> Result<Polynomial> {
        self.check_host_budget(host.vertex_count())?;
        Ok(independence_polynomial(&AdjGraph::from_host(host)))
    }

    /// `Z_H(λ) = Σ_{I independent} λ^{|I|}`.
    pub fn exact_hardcore_z<S: Scalar, H: HostGraph + ?Sized>(&self, host: &H, lambda: &S) -> Result<S> {
        Ok(self.independence_polynomial(host)?.eval(lambda))
    }

    /// Hard-core measure over occupancy masks.
    pub fn exact_hardcore_distribution<S: Scalar, H: HostGraph + ?Sized>(
        &self,
        host: &H,
        lambda: &S,
    ) -> Result<ExactDistribution<S>> {
        self.check_host_budget(host.vertex_count())?;
        let sets = independent_sets(&AdjGraph::from_host(host));
        Ok(ExactDistribution::from_weights(
            sets.into_iter()
                .map(|m| (m, lambda.pow_u(m.count_ones() as usize))),
        ))
    }

    /// Per-vertex occupation probabilities under the hard-core measure.
    pub fn exact_hardcore_marginals<S: Scalar, H: HostGraph + ?Sized>(
        &self,
        host: &H,
        lambda: &S,
    ) -> Result<Vec<S>> {
        let dist = self.exact_hardcore_distribution(host, lambda)?;
        Ok((0..host.vertex_count())
            .map(|v| dist.expectation(|m| if m >> v & 1 == 1 { S::one() } else { S::zero() }))
            .collect())
    }

    /// Enumerates every admissible defect pair for `part` and `cap`.
    pub fn defect_law(&self, part: &Partition, cap: usize) -> Result<DefectLaw> {
        let (na, nb) = part.sizes();
        self.check_graph_budget(na.max(nb))?;
        self.check_host_budget(na * nb)?;
        let n = part.n();
        if pair_count(n) > 64 {
            return Err(Error::BudgetExceeded {
                what: "defect state encoding",
                size: n,
                budget: 11,
            });
        }
        let mut s_side = Vec::new();
        let inside = |side: Side| move |e: EdgeId| part.side(e.i()) == side && part.side(e.j()) == side;
        for_each_triangle_free(n, Some(cap), inside(Side::A), |g| s_side.push(g.edge_mask()));
        let mut t_side = Vec::new();
        for_each_triangle_free(n, Some(cap), inside(Side::B), |g| t_side.push(g.edge_mask()));
        let mut states = Vec::with_capacity(s_side.len() * t_side.len());
        let mut index = HashMap::new();
        for &s in &s_side {
            for &t in &t_side {
                let mask = s | t;
                let g = Graph::from_edge_mask(n, mask);
                let view = ProductGraphView::new(part, &g);
                let z = independence_polynomial(&AdjGraph::from_host(&view));
                index.insert(mask, states.len());
                states.push((mask, mask.count_ones() as usize, z));
            }
        }
        Ok(DefectLaw {
            part: part.clone(),
            cap,
            states,
            index,
        })
    }

    /// `ν_{A,B,λ}` together with its normalizer `Zʷ_{A,B}(λ)`.
    pub fn exact_nu<S: Scalar>(
        &self,
        part: &Partition,
        lambda: &S,
        cap: usize,
    ) -> Result<(ExactDistribution<S>, S)> {
        let law = self.defect_law(part, cap)?;
        Ok((law.distribution(lambda), law.normalizer(lambda)))
    }

    /// `Σ_{(A,B)} Zʷ_{A,B}(λ)` by brute force over every ordered partition of
    /// `[n]` with `||A|−|B|| ≤ max_imbalance`.
    pub fn exact_weak_normalizer(
        &self,
        n: usize,
        cap: usize,
        max_imbalance: usize,
    ) -> Result<Polynomial> {
        let mut total = Polynomial::default();
        for a_mask in 0u64..(1 << n) {
            let a: Vec<usize> = (0..n).filter(|&v| a_mask >> v & 1 == 1).collect();
            if a.len().abs_diff(n - a.len()) > max_imbalance {
                continue;
            }
            let part = Partition::from_a_set(n, &a)?;
            total.add_assign(&self.defect_law(&part, cap)?.normalizer_polynomial());
        }
        Ok(total)
    }
}
