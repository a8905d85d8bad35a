//! Host graphs for the hard-core model.
//!
//! The hard-core routines only need vertex counts, degrees and neighbourhood
//! scans, so they are written against [`HostGraph`]. The Cartesian product
//! `S□T` is exposed lazily through [`ProductGraphView`].

use crate::graph::Graph;
use crate::partition::Partition;

pub trait HostGraph: Sync {
    fn vertex_count(&self) -> usize;

    fn degree(&self, v: usize) -> usize;

    /// Calls `f` on neighbours of `v` until it returns `true`; reports whether
    /// it did.
    fn any_neighbor<F: FnMut(usize) -> bool>(&self, v: usize, f: F) -> bool;

    fn for_each_neighbor<F: FnMut(usize)>(&self, v: usize, mut f: F) {
        self.any_neighbor(v, |w| {
            f(w);
            false
        });
    }

    fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree(v));
        self.for_each_neighbor(v, |w| out.push(w));
        out
    }

    fn max_degree(&self) -> usize {
        (0..self.vertex_count())
            .map(|v| self.degree(v))
            .max()
            .unwrap_or(0)
    }

    fn edge_count(&self) -> usize {
        (0..self.vertex_count()).map(|v| self.degree(v)).sum::<usize>() / 2
    }
}

impl HostGraph for Graph {
    fn vertex_count(&self) -> usize {
        self.n()
    }

    fn degree(&self, v: usize) -> usize {
        Graph::degree(self, v)
    }

    fn any_neighbor<F: FnMut(usize) -> bool>(&self, v: usize, f: F) -> bool {
        self.neighbors(v).any(f)
    }

    fn max_degree(&self) -> usize {
        Graph::max_degree(self)
    }

    fn edge_count(&self) -> usize {
        Graph::edge_count(self)
    }
}

/// Explicit adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjGraph {
    adj: Vec<Vec<usize>>,
}

impl AdjGraph {
    pub fn empty(v: usize) -> Self {
        Self {
            adj: vec![Vec::new(); v],
        }
    }

    /// Builds a simple graph; duplicate edges are merged, loops rejected.
    pub fn from_edges(v: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(v);
        for &(a, b) in edges {
            assert!(a != b && a < v && b < v, "bad edge ({a}, {b})");
            if !g.adj[a].contains(&b) {
                g.adj[a].push(b);
                g.adj[b].push(a);
            }
        }
        for row in &mut g.adj {
            row.sort_unstable();
        }
        g
    }

    pub fn from_host<H: HostGraph + ?Sized>(h: &H) -> Self {
        let adj = (0..h.vertex_count())
            .map(|v| {
                let mut row = h.neighbors(v);
                row.sort_unstable();
                row
            })
            .collect();
        Self { adj }
    }

    pub fn cycle(v: usize) -> Self {
        let edges: Vec<_> = (0..v).map(|i| (i, (i + 1) % v)).collect();
        Self::from_edges(v, &edges)
    }

    pub fn path(v: usize) -> Self {
        let edges: Vec<_> = (1..v).map(|i| (i - 1, i)).collect();
        Self::from_edges(v, &edges)
    }

    pub fn complete(v: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..v {
            for j in i + 1..v {
                edges.push((i, j));
            }
        }
        Self::from_edges(v, &edges)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, row) in self.adj.iter().enumerate() {
            out.extend(row.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// Neighbour bit masks; requires at most 64 vertices.
    pub fn neighbor_masks(&self) -> Vec<u64> {
        assert!(self.adj.len() <= 64);
        self.adj
            .iter()
            .map(|row| row.iter().fold(0u64, |m, &w| m | 1 << w))
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let v = self.adj.len();
        if v == 0 {
            return true;
        }
        let mut seen = vec![false; v];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(a) = stack.pop() {
            for &b in &self.adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    count += 1;
                    stack.push(b);
                }
            }
        }
        count == v
    }

    /// Vertex sets of the connected components, each sorted.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let v = self.adj.len();
        let mut comp = vec![usize::MAX; v];
        let mut out = Vec::new();
        for s in 0..v {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut k = 0;
            while k < members.len() {
                let a = members[k];
                k += 1;
                for &b in &self.adj[a] {
                    if comp[b] == usize::MAX {
                        comp[b] = id;
                        members.push(b);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Subgraph induced on `verts`, relabelled by position.
    pub fn induced(&self, verts: &[usize]) -> AdjGraph {
        let mut index = vec![usize::MAX; self.adj.len()];
        for (k, &v) in verts.iter().enumerate() {
            index[v] = k;
        }
        let adj = verts
            .iter()
            .map(|&v| {
                let mut row: Vec<usize> = self.adj[v]
                    .iter()
                    .filter(|&&w| index[w] != usize::MAX)
                    .map(|&w| index[w])
                    .collect();
                row.sort_unstable();
                row
            })
            .collect();
        AdjGraph { adj }
    }
}

impl HostGraph for AdjGraph {
    fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    fn any_neighbor<F: FnMut(usize) -> bool>(&self, v: usize, mut f: F) -> bool {
        self.adj[v].iter().any(|&w| f(w))
    }
}

/// The Cartesian product `S□T` on `A×B`, where `S` and `T` are the parts of a
/// defect graph inside `A` and `B`.
///
/// Vertex `(a, b)` has index `pos(a)·|B| + pos(b)`; `(a, b) ~ (a', b)` when
/// `aa' ∈ S` and `(a, b) ~ (a, b')` when `bb' ∈ T`.
#[derive(Debug, Clone, Copy)]
pub struct ProductGraphView<'a> {
    part: &'a Partition,
    defects: &'a Graph,
}

impl<'a> ProductGraphView<'a> {
    /// `defects` must only contain pairs inside a part.
    pub fn new(part: &'a Partition, defects: &'a Graph) -> Self {
        debug_assert!(defects.edges().all(|e| part.same_side(e.i(), e.j())));
        Self { part, defects }
    }

    pub fn partition(&self) -> &Partition {
        self.part
    }

    pub fn defects(&self) -> &Graph {
        self.defects
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize) -> usize {
        self.part.position(a) * self.part.sizes().1 + self.part.position(b)
    }

    #[inline]
    pub fn coords(&self, v: usize) -> (usize, usize) {
        let nb = self.part.sizes().1;
        (self.part.members_a()[v / nb], self.part.members_b()[v % nb])
    }
}

impl HostGraph for ProductGraphView<'_> {
    fn vertex_count(&self) -> usize {
        let (na, nb) = self.part.sizes();
        na * nb
    }

    fn degree(&self, v: usize) -> usize {
        let (a, b) = self.coords(v);
        self.defects.degree(a) + self.defects.degree(b)
    }

    fn any_neighbor<F: FnMut(usize) -> bool>(&self, v: usize, mut f: F) -> bool {
        let nb = self.part.sizes().1;
        let (ia, ib) = (v / nb, v % nb);
        let (a, b) = (self.part.members_a()[ia], self.part.members_b()[ib]);
        self.defects
            .neighbors(a)
            .any(|a2| f(self.part.position(a2) * nb + ib))
            || self
                .defects
                .neighbors(b)
                .any(|b2| f(ia * nb + self.part.position(b2)))
    }

    fn max_degree(&self) -> usize {
        let (na, nb) = self.part.sizes();
        if na == 0 || nb == 0 {
            return 0;
        }
        let da = self.part.members_a().iter().map(|&a| self.defects.degree(a)).max();
        let db = self.part.members_b().iter().map(|&b| self.defects.degree(b)).max();
        da.unwrap_or(0) + db.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeId;
    use rand::{Rng, SeedableRng};

    fn random_defects<R: Rng>(part: &Partition, density: f64, rng: &mut R) -> Graph {
        let mut g = Graph::empty(part.n());
        for e in part.intra_pairs() {
            if rng.gen_bool(density) {
                g.insert(e);
            }
        }
        g
    }

    fn materialize_by_definition(part: &Partition, d: &Graph) -> AdjGraph {
        let (na, nb) = part.sizes();
        let mut edges = Vec::new();
        for (ia, &a) in part.members_a().iter().enumerate() {
            for (ib, &b) in part.members_b().iter().enumerate() {
                for (ja, &a2) in part.members_a().iter().enumerate() {
                    if d.has_edge(a, a2) {
                        edges.push((ia * nb + ib, ja * nb + ib));
                    }
                }
                for (jb, &b2) in part.members_b().iter().enumerate() {
                    if d.has_edge(b, b2) {
                        edges.push((ia * nb + ib, ia * nb + jb));
                    }
                }
            }
        }
        AdjGraph::from_edges(na * nb, &edges)
    }

    #[test]
    fn product_view_matches_definition() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let na = rng.gen_range(1..=5);
            let nb = rng.gen_range(1..=5);
            let n = na + nb;
            let a: Vec<usize> = {
                let mut v: Vec<usize> = (0..n).collect();
                rand::seq::SliceRandom::shuffle(v.as_mut_slice(), &mut rng);
                v.truncate(na);
                v
            };
            let part = Partition::from_a_set(n, &a).unwrap();
            let d = random_defects(&part, rng.gen_range(0.0..1.0), &mut rng);
            let view = ProductGraphView::new(&part, &d);
            let explicit = materialize_by_definition(&part, &d);
            assert_eq!(AdjGraph::from_host(&view), explicit);
            assert_eq!(view.max_degree(), explicit.max_degree());
            let dmax = d.max_degree();
            assert!(view.max_degree() <= 2 * dmax);
            for v in 0..view.vertex_count() {
                let (a, b) = view.coords(v);
                assert_eq!(view.index(a, b), v);
                assert_eq!(view.degree(v), d.degree(a) + d.degree(b));
            }
        }
    }

    #[test]
    fn single_defect_edge_gives_matching() {
        let part = Partition::canonical(4, 2);
        let mut d = Graph::empty(4);
        d.insert(EdgeId::between(0, 1));
        let view = ProductGraphView::new(&part, &d);
        let g = AdjGraph::from_host(&view);
        assert_eq!(g.edges(), vec![(0, 2), (1, 3)]);
    }

    #[test]
    fn components_and_induced() {
        let g = AdjGraph::from_edges(6, &[(0, 1), (1, 2), (4, 5)]);
        assert_eq!(g.components(), vec![vec![0, 1, 2], vec![3], vec![4, 5]]);
        let h = g.induced(&[1, 2, 4]);
        assert_eq!(h.edges(), vec![(0, 1)]);
        assert!(AdjGraph::cycle(5).is_connected());
        assert!(!g.is_connected());
    }
}
