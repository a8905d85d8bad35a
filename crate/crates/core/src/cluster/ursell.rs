//! Ursell coefficients of incompatibility graphs.

use std::collections::HashMap;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::host::HostGraph;

/// Graph on the positions of a cluster tuple, at most 32 positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IncompatibilityGraph {
    adj: Vec<u32>,
}

impl IncompatibilityGraph {
    pub fn from_edges(k: usize, edges: &[(usize, usize)]) -> Self {
        assert!(k <= 32);
        let mut adj = vec![0u32; k];
        for &(a, b) in edges {
            assert!(a != b && a < k && b < k);
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        Self { adj }
    }

    /// Positions `i ≠ j` are joined when they repeat a host vertex or hold
    /// adjacent host vertices.
    pub fn of_tuple<H: HostGraph + ?Sized>(host: &H, tuple: &[usize]) -> Self {
        let k = tuple.len();
        let mut edges = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                let (a, b) = (tuple[i], tuple[j]);
                if a == b || host.any_neighbor(a, |w| w == b) {
                    edges.push((i, j));
                }
            }
        }
        Self::from_edges(k, &edges)
    }

    pub(crate) fn from_masks(adj: Vec<u32>) -> Self {
        Self { adj }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn masks(&self) -> &[u32] {
        &self.adj
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, &m) in self.adj.iter().enumerate() {
            for b in a + 1..self.adj.len() {
                if m >> b & 1 == 1 {
                    out.push((a, b));
                }
            }
        }
        out
    }

    fn connected_within(&self, set: u32) -> bool {
        if set == 0 {
            return true;
        }
        let mut seen = 1u32 << set.trailing_zeros();
        loop {
            let mut grow = seen;
            let mut s = seen;
            while s != 0 {
                let v = s.trailing_zeros() as usize;
                s &= s - 1;
                grow |= self.adj[v] & set;
            }
            if grow == seen {
                return seen == set;
            }
            seen = grow;
        }
    }

    pub fn is_connected(&self) -> bool {
        self.connected_within(full(self.len()))
    }

    /// Relabels positions: new position `i` is old position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.len();
        let mut inv = vec![0; k];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let adj = perm
            .iter()
            .map(|&old| {
                let mut m = 0u32;
                for b in 0..k {
                    if self.adj[old] >> b & 1 == 1 {
                        m |= 1 << inv[b];
                    }
                }
                m
            })
            .collect();
        Self { adj }
    }
}

fn full(k: usize) -> u32 {
    if k == 32 {
        u32::MAX
    } else {
        (1u32 << k) - 1
    }
}

/// `Σ_{A spanning connected} (−1)^{|A|}` over edge subsets of `g`.
///
/// With `h(S) = [S independent]` the sum over all edge subsets of `g[S]`,
/// splitting off the block of the smallest vertex gives
/// `f(S) = h(S) − Σ_{min S ∈ T ⊊ S} f(T)·h(S∖T)`.
pub fn connected_signed_sum(g: &IncompatibilityGraph) -> i64 {
    let k = g.len();
    if k == 0 {
        return 0;
    }
    assert!(k <= 20, "subset recursion is exponential in the cluster size");
    let size = 1usize << k;
    let mut independent = vec![false; size];
    independent[0] = true;
    for s in 1..size {
        let v = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        independent[s] = independent[rest] && (g.adj[v] as usize & rest) == 0;
    }
    let mut f = vec![0i64; size];
    for s in 1..size {
        let low = s & s.wrapping_neg();
        let others = s ^ low;
        let mut acc = independent[s] as i64;
        // T = low ∪ sub for proper subsets sub of others
        let mut sub = others;
        loop {
            let t = low | sub;
            if t != s && independent[s ^ t] {
                acc -= f[t];
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & others;
        }
        f[s] = acc;
    }
    f[size - 1]
}

/// The same sum by listing every edge subset; only for small graphs.
pub fn connected_signed_sum_by_subsets(g: &IncompatibilityGraph) -> i64 {
    let edges = g.edges();
    assert!(edges.len() <= 24);
    let k = g.len();
    let mut total = 0i64;
    for mask in 0u32..(1 << edges.len()) {
        let mut adj = vec![0u32; k];
        for (idx, &(a, b)) in edges.iter().enumerate() {
            if mask >> idx & 1 == 1 {
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
        }
        if IncompatibilityGraph::from_masks(adj).is_connected() {
            total += if mask.count_ones() % 2 == 0 { 1 } else { -1 };
        }
    }
    total
}

fn factorial(k: usize) -> i64 {
    (1..=k as i64).product()
}

/// `φ(Γ) = (1/k!) Σ_{A spanning connected} (−1)^{|A|}`.
pub fn ursell(g: &IncompatibilityGraph) -> Result<Rational64> {
    if g.is_empty() || !g.is_connected() {
        return Err(Error::contract(
            "Ursell function is only defined for connected incompatibility graphs",
        ));
    }
    Ok(Rational64::new(connected_signed_sum(g), factorial(g.len())))
}

/// Number of spanning trees by the matrix-tree theorem (Bareiss elimination
/// on a reduced Laplacian).
pub fn spanning_tree_count(g: &IncompatibilityGraph) -> u64 {
    let k = g.len();
    if k <= 1 {
        return 1;
    }
    let m = k - 1;
    let mut a = vec![vec![0i128; m]; m];
    for i in 0..m {
        a[i][i] = g.adj[i].count_ones() as i128;
        for j in 0..m {
            if i != j && g.adj[i] >> j & 1 == 1 {
                a[i][j] = -1;
            }
        }
    }
    let mut prev = 1i128;
    let mut sign = 1i128;
    for col in 0..m {
        if a[col][col] == 0 {
            match (col + 1..m).find(|&r| a[r][col] != 0) {
                Some(r) => {
                    a.swap(col, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for r in col + 1..m {
            for c in col + 1..m {
                a[r][c] = (a[r][c] * a[col][col] - a[r][col] * a[col][c]) / prev;
            }
        }
        prev = a[col][col];
    }
    (sign * a[m - 1][m - 1]) as u64
}

/// `(|k!·φ(Γ)|, number of spanning trees)`; the tree-graph bound says the
/// first never exceeds the second.
pub fn penrose_bound_check(g: &IncompatibilityGraph) -> Result<(u64, u64)> {
    if !g.is_connected() {
        return Err(Error::contract("Penrose check needs a connected graph"));
    }
    Ok((connected_signed_sum(g).unsigned_abs(), spanning_tree_count(g)))
}

/// Memo of connected signed sums keyed by labelled adjacency.
#[derive(Debug, Default)]
pub struct UrsellCache {
    memo: HashMap<Vec<u32>, i64>,
}

impl UrsellCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn signed_sum(&mut self, g: &IncompatibilityGraph) -> i64 {
        if let Some(&v) = self.memo.get(&g.adj) {
            return v;
        }
        let v = connected_signed_sum(g);
        self.memo.insert(g.adj.clone(), v);
        v
    }

    pub fn len(&self) -> usize {
        self.memo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memo.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(k: usize, edges: &[(usize, usize)]) -> IncompatibilityGraph {
        IncompatibilityGraph::from_edges(k, edges)
    }

    #[test]
    fn small_values() {
        assert_eq!(ursell(&graph(1, &[])).unwrap(), Rational64::new(1, 1));
        assert_eq!(ursell(&graph(2, &[(0, 1)])).unwrap(), Rational64::new(-1, 2));
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(ursell(&tri).unwrap(), Rational64::new(1, 3));
        let path = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(ursell(&path).unwrap(), Rational64::new(1, 6));
        assert!(ursell(&graph(2, &[])).is_err());
    }

    #[test]
    fn complete_graphs_follow_the_log_series() {
        // k!φ(K_k) = (−1)^{k−1}(k−1)!
        for k in 1..=8 {
            let mut edges = Vec::new();
            for a in 0..k {
                for b in a + 1..k {
                    edges.push((a, b));
                }
            }
            let s = connected_signed_sum(&graph(k, &edges));
            let expect = if k % 2 == 1 { 1 } else { -1 } * factorial(k - 1);
            assert_eq!(s, expect);
        }
    }

    fn random_connected<R: Rng>(k: usize, density: f64, rng: &mut R) -> IncompatibilityGraph {
        loop {
            let mut edges = Vec::new();
            for a in 0..k {
                for b in a + 1..k {
                    if rng.gen_bool(density) {
                        edges.push((a, b));
                    }
                }
            }
            let g = graph(k, &edges);
            if g.is_connected() {
                return g;
            }
        }
    }

    #[test]
    fn recursion_matches_edge_subsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let k = rng.gen_range(1..=6);
            let g = random_connected(k, rng.gen_range(0.3..1.0), &mut rng);
            assert_eq!(connected_signed_sum(&g), connected_signed_sum_by_subsets(&g));
        }
        // disconnected graphs have no connected spanning subgraph
        let g = graph(4, &[(0, 1), (2, 3)]);
        assert_eq!(connected_signed_sum(&g), 0);
        assert_eq!(connected_signed_sum_by_subsets(&g), 0);
    }

    #[test]
    fn invariant_under_relabelling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let k = rng.gen_range(2..=6);
            let g = random_connected(k, 0.5, &mut rng);
            let base = ursell(&g).unwrap();
            let mut perm: Vec<usize> = (0..k).collect();
            for _ in 0..20 {
                perm.shuffle(&mut rng);
                assert_eq!(ursell(&g.permuted(&perm)).unwrap(), base);
            }
        }
    }

    #[test]
    fn penrose_examples() {
        assert_eq!(penrose_bound_check(&graph(2, &[(0, 1)])).unwrap(), (1, 1));
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(penrose_bound_check(&tri).unwrap(), (2, 3));
        let c4 = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let (phi, trees) = penrose_bound_check(&c4).unwrap();
        assert_eq!(trees, 4);
        assert!(phi <= trees);
        // K5 has 5³ spanning trees
        let mut edges = Vec::new();
        for a in 0..5 {
            for b in a + 1..5 {
                edges.push((a, b));
            }
        }
        assert_eq!(spanning_tree_count(&graph(5, &edges)), 125);
    }

    #[test]
    fn penrose_holds_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let k = rng.gen_range(1..=7);
            let g = random_connected(k, rng.gen_range(0.2..1.0), &mut rng);
            let (phi, trees) = penrose_bound_check(&g).unwrap();
            assert!(phi <= trees);
        }
    }
}
