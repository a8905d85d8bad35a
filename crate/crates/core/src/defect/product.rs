//! Exact hard-core partition functions of `S□T` through its components.
//!
//! A component of `S□T` is the product of a component of `S` with a
//! component of `T`, so `Z_{S□T}` factors over pairs of components.

use crate::graph::Graph;
use crate::host::AdjGraph;
use crate::oracle::independence_polynomial;
use crate::partition::{Partition, Side};
use crate::poly::Polynomial;

/// Connected components of the defect graph inside one part.
pub fn side_components(part: &Partition, g: &Graph, side: Side) -> Vec<Vec<usize>> {
    let n = part.n();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for &s in part.members(side) {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut k = 0;
        while k < comp.len() {
            let a = comp[k];
            k += 1;
            for b in g.neighbors(a) {
                if !seen[b] {
                    seen[b] = true;
                    comp.push(b);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// The component of `v` in `g`.
pub(crate) fn component_of(g: &Graph, v: usize) -> Vec<usize> {
    let mut comp = vec![v];
    let mut k = 0;
    while k < comp.len() {
        let a = comp[k];
        k += 1;
        for b in g.neighbors(a) {
            if !comp.contains(&b) {
                comp.push(b);
            }
        }
    }
    comp.sort_unstable();
    comp
}

/// `g[x] □ h[y]` with vertex `(i, j)` at `i·|y| + j`.
pub fn product_of(g: &Graph, x: &[usize], h: &Graph, y: &[usize]) -> AdjGraph {
    let ny = y.len();
    let mut edges = Vec::new();
    for (i, &a) in x.iter().enumerate() {
        for (i2, &a2) in x.iter().enumerate().skip(i + 1) {
            if g.has_edge(a, a2) {
                edges.extend((0..ny).map(|j| (i * ny + j, i2 * ny + j)));
            }
        }
    }
    for (j, &b) in y.iter().enumerate() {
        for (j2, &b2) in y.iter().enumerate().skip(j + 1) {
            if h.has_edge(b, b2) {
                edges.extend((0..x.len()).map(|i| (i * ny + j, i * ny + j2)));
            }
        }
    }
    AdjGraph::from_edges(x.len() * ny, &edges)
}

/// `S□T` split into isolated vertices and non-trivial product components.
#[derive(Debug, Clone)]
pub struct ProductFactors {
    /// Number of isolated vertices (pairs of singleton components).
    pub singles: usize,
    /// Non-trivial components, `None` when larger than the size limit.
    pub pieces: Vec<Option<AdjGraph>>,
}

impl ProductFactors {
    pub fn new(part: &Partition, g: &Graph, limit: usize) -> Self {
        let ca = side_components(part, g, Side::A);
        let cb = side_components(part, g, Side::B);
        let single_a = ca.iter().filter(|c| c.len() == 1).count();
        let single_b = cb.iter().filter(|c| c.len() == 1).count();
        let mut pieces = Vec::new();
        for x in &ca {
            for y in &cb {
                if x.len() == 1 && y.len() == 1 {
                    continue;
                }
                pieces.push((x.len() * y.len() <= limit).then(|| product_of(g, x, g, y)));
            }
        }
        Self {
            singles: single_a * single_b,
            pieces,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.pieces.iter().all(Option::is_some)
    }

    /// `ln Z_{S□T}(λ)` when every piece is within the limit.
    pub fn ln_z(&self, lambda: f64) -> Option<f64> {
        let mut total = self.singles as f64 * lambda.ln_1p();
        for p in &self.pieces {
            total += independence_polynomial(p.as_ref()?).ln_eval(lambda);
        }
        Some(total)
    }

    /// `Z_{S□T}` as a polynomial; coefficients must fit in `u64`.
    pub fn polynomial(&self) -> Option<Polynomial> {
        let mut z = Polynomial::binomial_power(self.singles);
        for p in &self.pieces {
            z = &z * &independence_polynomial(p.as_ref()?);
        }
        Some(z)
    }
}
