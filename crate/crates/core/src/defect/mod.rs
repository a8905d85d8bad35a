//! Glauber dynamics for the defect law `ν_{A,B,λ}`.
//!
//! Given an ordered partition `(A, B)`, a defect state is a pair of
//! triangle-free graphs `S` on `A` and `T` on `B` with `Δ(S∪T) ≤ cap`, weighted
//! by `λ^{|S|+|T|} Z_{S□T}(λ)`. The chain resamples one intra-part pair at a
//! time from an estimate of its conditional marginal.

mod marginal;
mod product;
mod sampler;

use std::f64::consts::E;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph};
use crate::hardcore::HardcoreConfig;
use crate::host::ProductGraphView;
use crate::partition::{Partition, Side};

pub use marginal::{
    cluster_marginal, local_log_ratio, marginal_hat, mcmc_marginal, MarginalEstimate,
    MarginalMethod,
};
pub use product::{product_of, side_components, ProductFactors};
pub use sampler::{estimate_zw, nu_glauber_step, sample_defects, DefectSampler, ZwReport};

/// `1/(96e³)`.
pub fn default_alpha() -> f64 {
    1.0 / (96.0 * E.powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginalEstimator {
    /// `p̂ = λr/(1+λr)` with `log r` from the truncated cluster series.
    ClusterRatio,
    /// `p̂ = λM₁/(M₂+λM₁)` with both partition functions estimated by the
    /// hard-core counter.
    McmcRatio,
}

impl fmt::Display for MarginalEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarginalEstimator::ClusterRatio => "cluster-ratio",
            MarginalEstimator::McmcRatio => "mcmc-ratio",
        })
    }
}

impl FromStr for MarginalEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cluster-ratio" => Ok(MarginalEstimator::ClusterRatio),
            "mcmc-ratio" => Ok(MarginalEstimator::McmcRatio),
            _ => Err(Error::contract(format!("unknown marginal estimator {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighDensityConfig {
    pub n: usize,
    pub lambda: f64,
    pub alpha: f64,
    /// Overrides `⌊α/λ⌋`.
    pub cap: Option<usize>,
    /// Regime constant `C` in `λ ≥ C/√n`; only used for warnings.
    pub regime_c: f64,
    /// Burn-in constant `K` in `K n² ln(n/ε)`.
    pub burn_in_k: f64,
    /// Truncation order of the cluster series.
    pub order: usize,
    pub estimator: MarginalEstimator,
    /// Use the MCMC ratio when the cluster certificate is missing or looser
    /// than the per-step budget.
    pub fallback: bool,
    /// Per-step `(ε′, δ′)`; default `ε/T` and `1/T`.
    pub step_eps: Option<f64>,
    pub step_delta: Option<f64>,
    pub hardcore: HardcoreConfig,
}

impl HighDensityConfig {
    pub fn new(n: usize, lambda: f64) -> Self {
        Self {
            n,
            lambda,
            alpha: default_alpha(),
            cap: None,
            regime_c: 1.0,
            burn_in_k: 6.0,
            order: 4,
            estimator: MarginalEstimator::ClusterRatio,
            fallback: true,
            step_eps: None,
            step_delta: None,
            hardcore: HardcoreConfig::default(),
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::contract("λ must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::contract("α must be positive"));
        }
        if self.n < 2 {
            return Err(Error::contract("need at least two vertices"));
        }
        if !(2..=12).contains(&self.order) {
            return Err(Error::contract("truncation order must lie in 2..=12"));
        }
        Ok(())
    }

    /// Degree cap on `S∪T`: `⌊α/λ⌋` unless overridden.
    pub fn cap(&self) -> usize {
        self.cap
            .unwrap_or_else(|| (self.alpha / self.lambda).floor().min(self.n as f64) as usize)
    }

    pub fn in_regime(&self) -> bool {
        self.lambda >= self.regime_c / (self.n as f64).sqrt()
    }

    /// `⌈K n² ln(n/ε)⌉`.
    pub fn burn_in_steps(&self, eps: f64) -> u64 {
        let n = self.n as f64;
        (self.burn_in_k * n * n * (n / eps).ln().max(1.0)).ceil() as u64
    }

    /// `2nλe^{−nλ²/5}`.
    pub fn omega_threshold(&self) -> f64 {
        omega_threshold(self.n, self.lambda)
    }
}

/// `2nλe^{−nλ²/5}`.
pub fn omega_threshold(n: usize, lambda: f64) -> f64 {
    let n = n as f64;
    2.0 * n * lambda * (-n * lambda * lambda / 5.0).exp()
}

/// Whether a defect state has `Δ(S∪T) ≤ 2nλe^{−nλ²/5}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaMembership {
    pub threshold: f64,
    pub max_degree: usize,
    pub member: bool,
}

/// A defect pair `(S, T)` stored as one graph on `[n]` with edges inside the
/// parts only.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectState {
    part: Partition,
    defects: Graph,
    cap: usize,
    // edge mask, kept when all pairs fit in 64 bits
    key: Option<u64>,
}

impl DefectState {
    pub fn new(part: Partition, cap: usize) -> Self {
        let n = part.n();
        let key = (n * n.saturating_sub(1) / 2 <= 64).then_some(0);
        Self {
            defects: Graph::empty(n),
            part,
            cap,
            key,
        }
    }

    pub fn from_defects(part: Partition, cap: usize, defects: Graph) -> Result<Self> {
        if defects.n() != part.n() {
            return Err(Error::contract("defect graph and partition disagree on n"));
        }
        let mut s = Self::new(part, cap);
        for e in defects.edges() {
            if !s.part.same_side(e.i(), e.j()) {
                return Err(Error::contract(format!("{e:?} crosses the partition")));
            }
            s.set(e, true);
        }
        if !s.is_valid() {
            return Err(Error::contract("defect graph has a triangle or exceeds the cap"));
        }
        Ok(s)
    }

    pub fn partition(&self) -> &Partition {
        &self.part
    }

    pub fn defects(&self) -> &Graph {
        &self.defects
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn key(&self) -> Option<u64> {
        self.key
    }

    pub fn view(&self) -> ProductGraphView<'_> {
        ProductGraphView::new(&self.part, &self.defects)
    }

    pub fn size(&self) -> usize {
        self.defects.edge_count()
    }

    pub fn edges_in(&self, side: Side) -> Vec<EdgeId> {
        self.defects
            .edges()
            .filter(|e| self.part.side(e.i()) == side)
            .collect()
    }

    pub fn max_degree(&self) -> usize {
        self.defects.max_degree()
    }

    pub fn is_valid(&self) -> bool {
        self.defects.is_triangle_free()
            && self.defects.max_degree() <= self.cap
            && self.defects.edges().all(|e| self.part.same_side(e.i(), e.j()))
    }

    /// Whether adding the absent pair `e` keeps the state admissible.
    pub fn can_add(&self, e: EdgeId) -> bool {
        self.part.same_side(e.i(), e.j())
            && self.defects.degree(e.i()) < self.cap
            && self.defects.degree(e.j()) < self.cap
            && !self.defects.closes_triangle(e)
    }

    pub fn omega(&self, lambda: f64) -> OmegaMembership {
        let threshold = omega_threshold(self.part.n(), lambda);
        let d = self.max_degree();
        OmegaMembership {
            threshold,
            max_degree: d,
            member: d as f64 <= threshold,
        }
    }

    pub(crate) fn set(&mut self, e: EdgeId, present: bool) {
        let t = self.defects.set(e, present);
        if t.changed() {
            if let Some(k) = self.key.as_mut() {
                *k ^= 1 << e.index(self.part.n());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_follows_alpha_over_lambda() {
        let cfg = HighDensityConfig::new(100, 0.5);
        assert_eq!(cfg.cap(), 0);
        let a = default_alpha();
        assert!((a - 1.0 / (96.0 * E.powi(3))).abs() < 1e-18);
        let cfg = HighDensityConfig::new(100, a / 2.5);
        assert_eq!(cfg.cap(), 2);
        assert_eq!(HighDensityConfig::new(8, 0.3).with_cap(1).cap(), 1);
    }

    #[test]
    fn state_tracks_key_and_admissibility() {
        let part = Partition::canonical(6, 3);
        let mut s = DefectState::new(part.clone(), 1);
        let e = EdgeId::between(0, 1);
        assert!(s.can_add(e));
        s.set(e, true);
        assert_eq!(s.key(), Some(1 << e.index(6)));
        assert!(!s.can_add(EdgeId::between(1, 2)));
        assert!(!s.can_add(EdgeId::between(2, 3)));
        assert!(s.can_add(EdgeId::between(3, 4)));
        s.set(e, false);
        assert_eq!(s.key(), Some(0));
        let crossing = Graph::from_edges(6, [(0, 4)]).unwrap();
        assert!(DefectState::from_defects(part.clone(), 1, crossing).is_err());
        let path = Graph::from_edges(6, [(0, 1), (1, 2)]).unwrap();
        assert!(DefectState::from_defects(part, 1, path).is_err());
    }

    #[test]
    fn omega_threshold_formula() {
        let s = DefectState::new(Partition::canonical(10, 5), 3);
        let o = s.omega(0.2);
        assert!((o.threshold - 2.0 * 10.0 * 0.2 * (-10.0 * 0.04 / 5.0f64).exp()).abs() < 1e-12);
        assert!(o.member);
    }

    #[test]
    fn estimator_names_round_trip() {
        for m in [MarginalEstimator::ClusterRatio, MarginalEstimator::McmcRatio] {
            assert_eq!(m.to_string().parse::<MarginalEstimator>().unwrap(), m);
        }
        assert!("exact".parse::<MarginalEstimator>().is_err());
    }
}
