//! Seed-derived random streams.
//!
//! A stream is keyed by `(master seed, module, chain id, purpose)` so the
//! numbers a chain sees do not depend on how work is scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix_str(h: u64, s: &str) -> u64 {
    s.bytes().fold(splitmix(h ^ 0x5bd1_e995), |acc, b| {
        splitmix(acc ^ u64::from(b))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    master: u64,
}

impl Streams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn seed(&self, module: &str, chain: u64, purpose: &str) -> u64 {
        let h = mix_str(splitmix(self.master), module);
        let h = splitmix(h ^ splitmix(chain));
        mix_str(h, purpose)
    }

    pub fn rng(&self, module: &str, chain: u64, purpose: &str) -> ChainRng {
        ChainRng::seed_from_u64(self.seed(module, chain, purpose))
    }
}

/// Draws a fresh child seed from a parent generator.
pub fn child_rng<R: Rng + ?Sized>(parent: &mut R) -> ChainRng {
    ChainRng::seed_from_u64(parent.gen())
}
