use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

/// Ordered split `(A, B)` of `[n]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    side: Vec<Side>,
    members_a: Vec<usize>,
    members_b: Vec<usize>,
    // position of each vertex inside its own part
    pos: Vec<u32>,
}

impl Partition {
    pub fn from_sides(side: Vec<Side>) -> Self {
        let mut members_a = Vec::new();
        let mut members_b = Vec::new();
        let mut pos = vec![0; side.len()];
        for (v, s) in side.iter().enumerate() {
            match s {
                Side::A => {
                    pos[v] = members_a.len() as u32;
                    members_a.push(v);
                }
                Side::B => {
                    pos[v] = members_b.len() as u32;
                    members_b.push(v);
                }
            }
        }
        Self {
            side,
            members_a,
            members_b,
            pos,
        }
    }

    pub fn from_a_set(n: usize, a: &[usize]) -> Result<Self> {
        let mut side = vec![Side::B; n];
        for &v in a {
            if v >= n {
                return Err(Error::contract(format!("vertex {v} outside [{n}]")));
            }
            side[v] = Side::A;
        }
        Ok(Self::from_sides(side))
    }

    /// `A = {0, …, size_a − 1}`, the representative used when only the
    /// imbalance matters.
    pub fn canonical(n: usize, size_a: usize) -> Self {
        assert!(size_a <= n);
        Self::from_sides((0..n).map(|v| if v < size_a { Side::A } else { Side::B }).collect())
    }

    /// Uniformly random ordered partition with `|A| = size_a`.
    pub fn random_with_size<R: Rng + ?Sized>(n: usize, size_a: usize, rng: &mut R) -> Self {
        let mut verts: Vec<usize> = (0..n).collect();
        verts.shuffle(rng);
        let mut side = vec![Side::B; n];
        for &v in &verts[..size_a] {
            side[v] = Side::A;
        }
        Self::from_sides(side)
    }

    pub fn n(&self) -> usize {
        self.side.len()
    }

    pub fn side(&self, v: usize) -> Side {
        self.side[v]
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.members_a.len(), self.members_b.len())
    }

    pub fn members_a(&self) -> &[usize] {
        &self.members_a
    }

    pub fn members_b(&self) -> &[usize] {
        &self.members_b
    }

    pub fn members(&self, s: Side) -> &[usize] {
        match s {
            Side::A => &self.members_a,
            Side::B => &self.members_b,
        }
    }

    #[inline]
    pub fn position(&self, v: usize) -> usize {
        self.pos[v] as usize
    }

    #[inline]
    pub fn same_side(&self, u: usize, v: usize) -> bool {
        self.side[u] == self.side[v]
    }

    pub fn imbalance(&self) -> usize {
        self.members_a.len().abs_diff(self.members_b.len())
    }

    /// `||A| − |B|| ≤ n/10`.
    pub fn is_weakly_balanced(&self) -> bool {
        10 * self.imbalance() <= self.n()
    }

    /// Every pair inside `A` followed by every pair inside `B`.
    pub fn intra_pairs(&self) -> Vec<EdgeId> {
        let mut out = Vec::new();
        for members in [&self.members_a, &self.members_b] {
            for (k, &u) in members.iter().enumerate() {
                for &v in &members[k + 1..] {
                    out.push(EdgeId::between(u, v));
                }
            }
        }
        out
    }

    /// Size of the part on the far side of an intra-part pair: the number of
    /// product-graph edges the pair contributes.
    pub fn opposite_size(&self, e: EdgeId) -> usize {
        match self.side(e.i()) {
            Side::A => self.members_b.len(),
            Side::B => self.members_a.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn sizes_and_balance() {
        let p = Partition::canonical(10, 5);
        assert_eq!(p.sizes(), (5, 5));
        assert!(p.is_weakly_balanced());
        let p = Partition::canonical(10, 6);
        assert_eq!(p.imbalance(), 2);
        assert!(!p.is_weakly_balanced());
        let p = Partition::canonical(20, 11);
        assert!(p.is_weakly_balanced());
    }

    #[test]
    fn intra_pairs_count() {
        let p = Partition::canonical(8, 3);
        assert_eq!(p.intra_pairs().len(), 3 + 10);
        assert!(p.intra_pairs().iter().all(|e| p.same_side(e.i(), e.j())));
    }

    #[test]
    fn random_partition_has_requested_size() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let p = Partition::random_with_size(30, 17, &mut rng);
        assert_eq!(p.sizes(), (17, 13));
        for &v in p.members_a() {
            assert_eq!(p.members_a()[p.position(v)], v);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Partition::from_a_set(3, &[3]).is_err());
    }
}
