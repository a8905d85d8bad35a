//! Enumeration of connected vertex sets and of clusters.

use crate::host::HostGraph;

use super::ursell::IncompatibilityGraph;

/// A tuple of host vertices whose incompatibility graph is connected.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cluster {
    vertices: Vec<usize>,
}

impl Cluster {
    /// `None` unless the tuple is non-empty and its incompatibility graph is
    /// connected.
    pub fn new<H: HostGraph + ?Sized>(host: &H, vertices: Vec<usize>) -> Option<Self> {
        if vertices.is_empty() || !IncompatibilityGraph::of_tuple(host, &vertices).is_connected() {
            return None;
        }
        Some(Self { vertices })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn incompatibility_graph<H: HostGraph + ?Sized>(&self, host: &H) -> IncompatibilityGraph {
        IncompatibilityGraph::of_tuple(host, &self.vertices)
    }
}

const FREE: u8 = 0;
const IN: u8 = 1;
const CAND: u8 = 2;
const BANNED: u8 = 3;

/// Scratch space for connected-set enumeration, reusable across roots.
pub struct SetEnumerator<'h, H: HostGraph + ?Sized> {
    host: &'h H,
    mark: Vec<u8>,
}

impl<'h, H: HostGraph + ?Sized> SetEnumerator<'h, H> {
    pub fn new(host: &'h H) -> Self {
        Self {
            host,
            mark: vec![FREE; host.vertex_count()],
        }
    }

    /// Calls `f` once for every connected vertex set of size at most
    /// `max_size` that contains `root` and avoids every vertex below `floor`.
    /// The slice handed to `f` lists the set in discovery order, root first.
    pub fn for_each_connected_set<F: FnMut(&[usize])>(
        &mut self,
        root: usize,
        floor: usize,
        max_size: usize,
        mut f: F,
    ) {
        if max_size == 0 || root < floor {
            return;
        }
        let mut set = vec![root];
        self.mark[root] = IN;
        let mut cand = Vec::new();
        let mut added = Vec::new();
        self.host.for_each_neighbor(root, |z| {
            if z >= floor && self.mark[z] == FREE {
                cand.push(z);
            }
        });
        for &z in &cand {
            self.mark[z] = CAND;
        }
        added.extend_from_slice(&cand);
        self.grow(floor, max_size, &mut set, cand, &mut f);
        for z in added {
            self.mark[z] = FREE;
        }
        self.mark[root] = FREE;
    }

    fn grow<F: FnMut(&[usize])>(
        &mut self,
        floor: usize,
        max_size: usize,
        set: &mut Vec<usize>,
        cand: Vec<usize>,
        f: &mut F,
    ) {
        f(set);
        if set.len() == max_size {
            return;
        }
        for i in 0..cand.len() {
            let w = cand[i];
            let mut next = cand[i + 1..].to_vec();
            let mut added = Vec::new();
            let mark = &mut self.mark;
            self.host.for_each_neighbor(w, |z| {
                if z >= floor && mark[z] == FREE {
                    mark[z] = CAND;
                    added.push(z);
                }
            });
            next.extend_from_slice(&added);
            self.mark[w] = IN;
            set.push(w);
            self.grow(floor, max_size, set, next, f);
            set.pop();
            for z in added {
                self.mark[z] = FREE;
            }
            self.mark[w] = BANNED;
        }
        for w in cand {
            self.mark[w] = CAND;
        }
    }
}

/// Every connected vertex set of size at most `max_size`, each once.
pub fn connected_sets<H: HostGraph + ?Sized>(host: &H, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut en = SetEnumerator::new(host);
    for root in 0..host.vertex_count() {
        en.for_each_connected_set(root, root, max_size, |s| out.push(s.to_vec()));
    }
    out
}

/// Connected vertex sets of size at most `max_size` containing every vertex
/// of `pivot`.
pub fn connected_sets_containing<H: HostGraph + ?Sized>(
    host: &H,
    pivot: &[usize],
    max_size: usize,
) -> Vec<Vec<usize>> {
    let Some(&root) = pivot.first() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    SetEnumerator::new(host).for_each_connected_set(root, 0, max_size, |s| {
        if pivot.iter().all(|u| s.contains(u)) {
            out.push(s.to_vec());
        }
    });
    out
}

/// Calls `f` on every word of length `len` over `set` that uses each letter.
pub fn for_each_surjective_word<F: FnMut(&[usize])>(set: &[usize], len: usize, mut f: F) {
    let k = set.len();
    if k == 0 || len < k {
        return;
    }
    let mut digits = vec![0usize; len];
    let mut word = vec![set[0]; len];
    let mut counts = vec![0usize; k];
    counts[0] = len;
    loop {
        if counts.iter().all(|&c| c > 0) {
            f(&word);
        }
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            counts[digits[pos]] -= 1;
            if digits[pos] + 1 < k {
                digits[pos] += 1;
                counts[digits[pos]] += 1;
                word[pos] = set[digits[pos]];
                break;
            }
            digits[pos] = 0;
            counts[0] += 1;
            word[pos] = set[0];
        }
    }
}

/// Every cluster of size at most `max_size` whose vertices include all of
/// `pivot`, each exactly once.
///
/// A tuple is a cluster exactly when its set of distinct vertices is connected
/// in the host, so the clusters are the surjective words over connected sets.
pub fn enumerate_clusters<H: HostGraph + ?Sized>(
    host: &H,
    pivot: &[usize],
    max_size: usize,
) -> Vec<Cluster> {
    let mut out = Vec::new();
    for set in connected_sets_containing(host, pivot, max_size) {
        for len in set.len()..=max_size {
            for_each_surjective_word(&set, len, |w| {
                out.push(Cluster {
                    vertices: w.to_vec(),
                })
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::host::AdjGraph;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn tuples(c: &[Cluster]) -> BTreeSet<Vec<usize>> {
        c.iter().map(|c| c.vertices().to_vec()).collect()
    }

    #[test]
    fn edgeless_host_gives_repetitions() {
        let host = AdjGraph::empty(3);
        let got = tuples(&enumerate_clusters(&host, &[1], 3));
        let want: BTreeSet<_> = [vec![1], vec![1, 1], vec![1, 1, 1]].into_iter().collect();
        assert_eq!(got, want);
    }

    #[test]
    fn single_edge_host() {
        let host = AdjGraph::complete(2);
        let got = enumerate_clusters(&host, &[0], 2);
        assert_eq!(got.len(), 4);
        let want: BTreeSet<_> = [vec![0], vec![0, 0], vec![0, 1], vec![1, 0]]
            .into_iter()
            .collect();
        assert_eq!(tuples(&got), want);
    }

    fn random_host<R: Rng>(v: usize, max_deg: usize, rng: &mut R) -> AdjGraph {
        let mut edges = Vec::new();
        let mut deg = vec![0; v];
        for _ in 0..3 * v {
            let a = rng.gen_range(0..v);
            let b = rng.gen_range(0..v);
            if a != b && deg[a] < max_deg && deg[b] < max_deg && !edges.contains(&(a.min(b), a.max(b))) {
                edges.push((a.min(b), a.max(b)));
                deg[a] += 1;
                deg[b] += 1;
            }
        }
        AdjGraph::from_edges(v, &edges)
    }

    /// Brute force: all words over the host vertices, filtered.
    fn brute_clusters(host: &AdjGraph, pivot: &[usize], k: usize) -> BTreeSet<Vec<usize>> {
        let v = host.vertex_count();
        let mut out = BTreeSet::new();
        for len in 1..=k {
            let total = v.pow(len as u32);
            for code in 0..total {
                let mut c = code;
                let word: Vec<usize> = (0..len)
                    .map(|_| {
                        let d = c % v;
                        c /= v;
                        d
                    })
                    .collect();
                if pivot.iter().all(|u| word.contains(u)) && Cluster::new(host, word.clone()).is_some() {
                    out.insert(word);
                }
            }
        }
        out
    }

    #[test]
    fn matches_brute_force_and_has_no_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let v = rng.gen_range(2..=6);
            let host = random_host(v, 3, &mut rng);
            let k = rng.gen_range(1..=4);
            let u = rng.gen_range(0..v);
            let w = rng.gen_range(0..v);
            for pivot in [vec![u], vec![u, w]] {
                let got = enumerate_clusters(&host, &pivot, k);
                let set = tuples(&got);
                assert_eq!(set.len(), got.len());
                assert_eq!(set, brute_clusters(&host, &pivot, k));
            }
        }
    }

    #[test]
    fn connected_sets_are_listed_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let v = rng.gen_range(1..=9);
            let host = random_host(v, 4, &mut rng);
            let k = rng.gen_range(1..=5);
            let got = connected_sets(&host, k);
            let canon: BTreeSet<Vec<usize>> = got
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    s.sort();
                    s
                })
                .collect();
            assert_eq!(canon.len(), got.len());
            let mut brute = BTreeSet::new();
            for mask in 1u32..(1 << v) {
                if mask.count_ones() as usize > k {
                    continue;
                }
                let verts: Vec<usize> = (0..v).filter(|&i| mask >> i & 1 == 1).collect();
                if host.induced(&verts).is_connected() {
                    brute.insert(verts);
                }
            }
            assert_eq!(canon, brute);
        }
    }

    #[test]
    fn growth_stays_inside_the_envelope() {
        // size-k clusters through a fixed vertex: at most k!(2e)^k Δ^{k-1}
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let host = random_host(10, 3, &mut rng);
            let delta = host.max_degree().max(1) as f64;
            let root = rng.gen_range(0..10);
            let all = enumerate_clusters(&host, &[root], 4);
            for k in 1..=4usize {
                let count = all.iter().filter(|c| c.size() == k).count() as f64;
                let fact: f64 = (1..=k).map(|i| i as f64).product();
                let bound = fact * (2.0 * std::f64::consts::E).powi(k as i32) * delta.powi(k as i32 - 1);
                assert!(count <= bound, "k={k}: {count} > {bound}");
            }
        }
    }
}
