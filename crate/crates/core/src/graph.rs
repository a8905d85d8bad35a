//! Dense graph state with word-parallel adjacency rows.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;

/// An unordered vertex pair `{i, j}` stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId {
    i: u32,
    j: u32,
}

impl EdgeId {
    /// Builds the canonical pair, rejecting loops and out-of-range endpoints.
    pub fn new(i: usize, j: usize, n: usize) -> Result<Self> {
        if i >= j || j >= n {
            return Err(Error::InvalidEdge { i, j, n });
        }
        Ok(Self {
            i: i as u32,
            j: j as u32,
        })
    }

    /// Orders the endpoints; panics on a loop.
    pub fn between(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "loops are not edges");
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        Self {
            i: i as u32,
            j: j as u32,
        }
    }

    pub fn i(self) -> usize {
        self.i as usize
    }

    pub fn j(self) -> usize {
        self.j as usize
    }

    pub fn endpoints(self) -> (usize, usize) {
        (self.i(), self.j())
    }

    /// Position in the upper-triangular enumeration of pairs of `[n]`.
    pub fn index(self, n: usize) -> usize {
        let (i, j) = self.endpoints();
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn from_index(idx: usize, n: usize) -> Self {
        debug_assert!(idx < pair_count(n));
        let mut i = 0;
        let mut start = 0;
        loop {
            let row = n - i - 1;
            if idx < start + row {
                return Self::between(i, i + 1 + (idx - start));
            }
            start += row;
            i += 1;
        }
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.i, self.j)
    }
}

/// `binom(n, 2)`.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Precomputed index → pair table so uniform pair selection is one draw.
#[derive(Debug, Clone)]
pub struct EdgeIndexer {
    n: usize,
    pairs: Vec<EdgeId>,
}

impl EdgeIndexer {
    pub fn new(n: usize) -> Self {
        let mut pairs = Vec::with_capacity(pair_count(n));
        for i in 0..n {
            for j in i + 1..n {
                pairs.push(EdgeId::between(i, j));
            }
        }
        Self { n, pairs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, idx: usize) -> EdgeId {
        self.pairs[idx]
    }

    pub fn pairs(&self) -> &[EdgeId] {
        &self.pairs
    }
}

/// State of one edge before and after an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Toggle {
    pub edge: EdgeId,
    pub before: bool,
    pub after: bool,
}

impl Toggle {
    pub fn changed(&self) -> bool {
        self.before != self.after
    }
}

/// Simple graph on `[n]` with bit-row adjacency and incremental degrees.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    words: usize,
    rows: Vec<u64>,
    degree: Vec<u32>,
    edge_count: usize,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edges().collect::<Vec<_>>())
            .finish()
    }
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Self {
            n,
            words,
            rows: vec![0; n * words],
            degree: vec![0; n],
            edge_count: 0,
        }
    }

    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Self::empty(n);
        for (a, b) in edges {
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            g.toggle_edge(EdgeId::new(i, j, n)?, true)?;
        }
        Ok(g)
    }

    /// Graph whose edge set is the bit mask over pair indices (n ≤ 11).
    pub fn from_edge_mask(n: usize, mask: u64) -> Self {
        assert!(pair_count(n) <= 64, "edge masks need binom(n,2) ≤ 64");
        let mut g = Self::empty(n);
        let mut m = mask;
        while m != 0 {
            let idx = m.trailing_zeros() as usize;
            g.insert(EdgeId::from_index(idx, n));
            m &= m - 1;
        }
        g
    }

    pub fn complete_bipartite(part: &Partition) -> Self {
        let mut g = Self::empty(part.n());
        for &a in part.members_a() {
            for &b in part.members_b() {
                g.insert(EdgeId::between(a, b));
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degree[v] as usize
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degree
    }

    pub fn max_degree(&self) -> usize {
        self.degree.iter().copied().max().unwrap_or(0) as usize
    }

    #[inline]
    pub fn row(&self, v: usize) -> &[u64] {
        &self.rows[v * self.words..(v + 1) * self.words]
    }

    #[inline]
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        (self.rows[a * self.words + b / 64] >> (b % 64)) & 1 == 1
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.has_edge(e.i(), e.j())
    }

    fn validate(&self, e: EdgeId) -> Result<()> {
        if e.j() >= self.n {
            return Err(Error::InvalidEdge {
                i: e.i(),
                j: e.j(),
                n: self.n,
            });
        }
        Ok(())
    }

    #[inline]
    fn flip_bits(&mut self, i: usize, j: usize) {
        self.rows[i * self.words + j / 64] ^= 1 << (j % 64);
        self.rows[j * self.words + i / 64] ^= 1 << (i % 64);
    }

    /// Sets the presence of `e`; a no-op when it already has that state.
    pub fn toggle_edge(&mut self, e: EdgeId, present: bool) -> Result<Toggle> {
        self.validate(e)?;
        Ok(self.set(e, present))
    }

    /// Unchecked variant of [`Graph::toggle_edge`] for hot loops.
    #[inline]
    pub fn set(&mut self, e: EdgeId, present: bool) -> Toggle {
        let before = self.contains(e);
        if before != present {
            let (i, j) = e.endpoints();
            self.flip_bits(i, j);
            if present {
                self.degree[i] += 1;
                self.degree[j] += 1;
                self.edge_count += 1;
            } else {
                self.degree[i] -= 1;
                self.degree[j] -= 1;
                self.edge_count -= 1;
            }
        }
        Toggle {
            edge: e,
            before,
            after: present,
        }
    }

    #[inline]
    pub fn insert(&mut self, e: EdgeId) -> Toggle {
        self.set(e, true)
    }

    #[inline]
    pub fn remove(&mut self, e: EdgeId) -> Toggle {
        self.set(e, false)
    }

    /// Number of common neighbours of the endpoints of `e`, i.e. the number of
    /// triangles that adding `e` would close.
    #[inline]
    pub fn triangles_through(&self, e: EdgeId) -> usize {
        let (ri, rj) = (self.row(e.i()), self.row(e.j()));
        ri.iter()
            .zip(rj)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Whether the endpoints of `e` share a neighbour; cheaper than counting.
    #[inline]
    pub fn closes_triangle(&self, e: EdgeId) -> bool {
        let (ri, rj) = (self.row(e.i()), self.row(e.j()));
        ri.iter().zip(rj).any(|(a, b)| a & b != 0)
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(v).iter().enumerate().flat_map(|(w, &bits)| {
            let mut b = bits;
            std::iter::from_fn(move || {
                if b == 0 {
                    None
                } else {
                    let t = b.trailing_zeros() as usize;
                    b &= b - 1;
                    Some(w * 64 + t)
                }
            })
        })
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&j| j > i)
                .map(move |j| EdgeId::between(i, j))
        })
    }

    pub fn is_triangle_free(&self) -> bool {
        self.edges().all(|e| !self.closes_triangle(e))
    }

    pub fn triangle_count(&self) -> usize {
        self.edges().map(|e| self.triangles_through(e)).sum::<usize>() / 3
    }

    /// Edges crossing the partition.
    pub fn cut_size(&self, part: &Partition) -> usize {
        assert_eq!(part.n(), self.n);
        self.edges()
            .filter(|e| !part.same_side(e.i(), e.j()))
            .count()
    }

    /// Copy of the graph keeping only edges inside `A` or inside `B`.
    pub fn intra_part(&self, part: &Partition) -> Graph {
        let mut g = Graph::empty(self.n);
        for e in self.edges().filter(|e| part.same_side(e.i(), e.j())) {
            g.insert(e);
        }
        g
    }

    pub fn crossing_edges<'a>(&'a self, part: &'a Partition) -> impl Iterator<Item = EdgeId> + 'a {
        self.edges().filter(move |e| !part.same_side(e.i(), e.j()))
    }

    /// Edges of `self` missing from `other`, plus the reverse.
    pub fn hamming_distance(&self, other: &Graph) -> usize {
        assert_eq!(self.n, other.n);
        let sum: usize = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum();
        sum / 2
    }

    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.n == other.n && self.rows.iter().zip(&other.rows).all(|(a, b)| a & !b == 0)
    }

    /// Bit mask over pair indices; requires binom(n,2) ≤ 64.
    pub fn edge_mask(&self) -> u64 {
        assert!(pair_count(self.n) <= 64, "edge masks need binom(n,2) ≤ 64");
        self.edges().fold(0u64, |m, e| m | 1 << e.index(self.n))
    }

    /// Recomputes degrees and the edge count from the rows.
    pub fn recount(&self) -> (Vec<u32>, usize) {
        let degree: Vec<u32> = (0..self.n)
            .map(|v| self.row(v).iter().map(|w| w.count_ones()).sum())
            .collect();
        let total = degree.iter().map(|&d| d as usize).sum::<usize>() / 2;
        (degree, total)
    }

    /// Checks symmetry, the empty diagonal and the cached counters.
    pub fn check_invariants(&self) -> bool {
        let symmetric = (0..self.n).all(|i| {
            !self.has_edge(i, i) && self.neighbors(i).all(|j| j < self.n && self.has_edge(j, i))
        });
        let (deg, m) = self.recount();
        symmetric && deg == self.degree && m == self.edge_count
    }

    /// Writes the `n m` / `i j` edge-list format.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.edge_count)?;
        for e in self.edges() {
            writeln!(w, "{e}")?;
        }
        Ok(())
    }

    pub fn to_edge_list(&self) -> String {
        let mut buf = Vec::new();
        self.write_edge_list(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (n, m) = loop {
            let Some((ln, line)) = lines.next() else {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing header".into(),
                });
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            break (parse_pair(&line, ln + 1)?, ln);
        };
        let (n, expected) = n;
        let mut g = Graph::empty(n);
        let mut seen = 0;
        for (ln, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (i, j) = parse_pair(&line, ln + 1)?;
            let e = EdgeId::new(i, j, n).map_err(|e| Error::Parse {
                line: ln + 1,
                message: e.to_string(),
            })?;
            if g.insert(e).before {
                return Err(Error::Parse {
                    line: ln + 1,
                    message: format!("duplicate edge {e}"),
                });
            }
            seen += 1;
        }
        if seen != expected {
            return Err(Error::Parse {
                line: m + 1,
                message: format!("header promises {expected} edges, found {seen}"),
            });
        }
        Ok(g)
    }

    pub fn parse_edge_list(s: &str) -> Result<Self> {
        Self::read_edge_list(s.as_bytes())
    }
}

fn parse_pair(line: &str, ln: usize) -> Result<(usize, usize)> {
    let mut it = line.split_ascii_whitespace().map(str::parse::<usize>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(Error::Parse {
            line: ln,
            message: format!("expected two integers, got {line:?}"),
        }),
    }
}
