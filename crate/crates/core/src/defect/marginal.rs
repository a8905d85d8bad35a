//! Conditional edge marginals `p(e | S, T)` of the defect law.
//!
//! For `e` absent with `(S,T)∪e` admissible,
//! `p = λr/(1+λr)` with `r = Z_{(G∪e)□}(λ)/Z_{G□}(λ)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anneal::LogEstimate;
use crate::cluster::truncated_log_ratio;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph};
use crate::hardcore::{hc_estimate_z, HardcoreConfig};
use crate::oracle::independence_polynomial;
use crate::partition::Partition;

use super::product::{component_of, product_of, side_components};
use super::{DefectState, HighDensityConfig, MarginalEstimator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarginalMethod {
    /// Adding `e` would leave the support, so `p = 0`.
    OutsideSupport,
    Cluster,
    Mcmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalEstimate {
    pub p: f64,
    /// Declared bound on `|p̂ − p|`.
    pub error: f64,
    pub method: MarginalMethod,
    /// False when the bound rests on a cluster tail outside its regime.
    pub certified: bool,
}

impl MarginalEstimate {
    fn zero() -> Self {
        Self {
            p: 0.0,
            error: 0.0,
            method: MarginalMethod::OutsideSupport,
            certified: true,
        }
    }

    /// Deterministic given the state, hence safe to memoize.
    pub fn is_reproducible(&self) -> bool {
        self.method != MarginalMethod::Mcmc || self.error == 0.0
    }
}

/// `λr/(1+λr)` from `ln r`.
fn edge_probability(lambda: f64, log_r: f64) -> f64 {
    let x = lambda.ln() + log_r;
    1.0 / (1.0 + (-x).exp())
}

fn check_absent(state: &DefectState, e: EdgeId) -> Result<()> {
    if state.defects().contains(e) {
        return Err(Error::contract(format!("{e:?} is already present")));
    }
    Ok(())
}

/// Cluster-ratio marginal; the error is how far `p` moves when `ln r` moves
/// by the series' tail bound.
pub fn cluster_marginal(
    state: &DefectState,
    e: EdgeId,
    lambda: f64,
    order: usize,
) -> Result<MarginalEstimate> {
    check_absent(state, e)?;
    if !state.can_add(e) {
        return Ok(MarginalEstimate::zero());
    }
    let s = truncated_log_ratio(&state.view(), e, &lambda, order)?;
    let p = edge_probability(lambda, s.value());
    let hi = edge_probability(lambda, s.upper());
    let lo = edge_probability(lambda, s.lower());
    Ok(MarginalEstimate {
        p,
        error: (hi - p).max(p - lo),
        method: MarginalMethod::Cluster,
        certified: s.certified,
    })
}

/// `ln(Z_{(G∪e)□}/Z_{G□})` computed on the part of the product that changes.
///
/// Only the components of `u` and `v` on the side of `e = uv` are affected,
/// so the ratio equals `Z_{F₁□Y}/Z_{F₀□Y}` where `F₀` is the defect graph on
/// those components, `F₁ = F₀ + e` and `Y` is the other side. Products of
/// components up to the configured size are summed exactly; otherwise both
/// factors go to the hard-core counter at `(eps, delta)` each.
pub fn local_log_ratio<R: Rng + ?Sized>(
    part: &Partition,
    g: &Graph,
    e: EdgeId,
    lambda: f64,
    eps: f64,
    delta: f64,
    hc: &HardcoreConfig,
    rng: &mut R,
) -> Result<LogEstimate> {
    let side = part.side(e.i());
    let mut c = component_of(g, e.i());
    if !c.contains(&e.j()) {
        c.extend(component_of(g, e.j()));
        c.sort_unstable();
    }
    let mut g1 = g.clone();
    g1.insert(e);
    let other = side_components(part, g, side.other());
    let limit = hc.exact_component_limit.min(64);

    if other.iter().all(|y| c.len() * y.len() <= limit) {
        let mut total = 0.0;
        let mut singles = 0usize;
        for y in &other {
            if y.len() == 1 {
                singles += 1;
                continue;
            }
            let z1 = independence_polynomial(&product_of(&g1, &c, g, y)).ln_eval(lambda);
            let z0 = independence_polynomial(&product_of(g, &c, g, y)).ln_eval(lambda);
            total += z1 - z0;
        }
        if singles > 0 {
            let solo = [part.members(side.other())[0]];
            let z1 = independence_polynomial(&product_of(&g1, &c, g, &solo)).ln_eval(lambda);
            let z0 = independence_polynomial(&product_of(g, &c, g, &solo)).ln_eval(lambda);
            total += singles as f64 * (z1 - z0);
        }
        return Ok(LogEstimate::exact(total));
    }

    let y = part.members(side.other());
    let h1 = product_of(&g1, &c, g, y);
    let h0 = product_of(g, &c, g, y);
    let m1 = hc_estimate_z(&h1, lambda, eps, delta, hc, rng)?;
    let m0 = hc_estimate_z(&h0, lambda, eps, delta, hc, rng)?;
    Ok(LogEstimate {
        log_value: m1.log_value - m0.log_value,
        eps: m1.eps + m0.eps,
        delta: (m1.delta + m0.delta).min(1.0),
    })
}

/// MCMC-ratio marginal `λM₁/(M₂+λM₁)`; the declared error is `3·eps`, which
/// holds with probability at least `1 − 2·delta`. Exact when every affected
/// product component is small.
pub fn mcmc_marginal<R: Rng + ?Sized>(
    state: &DefectState,
    e: EdgeId,
    lambda: f64,
    eps: f64,
    delta: f64,
    hc: &HardcoreConfig,
    rng: &mut R,
) -> Result<MarginalEstimate> {
    check_absent(state, e)?;
    if !state.can_add(e) {
        return Ok(MarginalEstimate::zero());
    }
    let lr = local_log_ratio(state.partition(), state.defects(), e, lambda, eps, delta, hc, rng)?;
    Ok(MarginalEstimate {
        p: edge_probability(lambda, lr.log_value),
        error: if lr.eps == 0.0 { 0.0 } else { 3.0 * eps },
        method: MarginalMethod::Mcmc,
        certified: true,
    })
}

/// `p̂(e | S, T)` for an absent pair `e`, using the configured estimator.
pub fn marginal_hat<R: Rng + ?Sized>(
    state: &DefectState,
    e: EdgeId,
    lambda: f64,
    cfg: &HighDensityConfig,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<MarginalEstimate> {
    if cfg.estimator == MarginalEstimator::ClusterRatio {
        let m = cluster_marginal(state, e, lambda, cfg.order)?;
        if !cfg.fallback || (m.certified && m.error <= eps) {
            return Ok(m);
        }
    }
    mcmc_marginal(state, e, lambda, eps, delta, &cfg.hardcore, rng)
}
