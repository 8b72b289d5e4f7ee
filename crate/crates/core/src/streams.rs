//! Deterministic random-stream derivation.
//!
//! Every draw in a run is keyed by (master seed, replica, site address,
//! particle index, purpose), with each component in its own lane of the
//! 256-bit generator seed. Results are therefore independent of worker
//! scheduling, and the block decomposition consumes byte-identical
//! randomness to the direct activation run, which is what makes the
//! coverage equivalence testable.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tree::Vertex;

/// Particle index reserved for the designated initial walker at the root.
pub const DESIGNATED_PARTICLE: u64 = u64::MAX;

const TAG_COUNT: u64 = 0x9E37_79B9_7F4A_7C15;
const TAG_WALK: u64 = 0xD1B5_4A32_D192_ED03;
const TAG_GENERIC: u64 = 0x8CB9_2BA7_2F3D_8DD7;

/// FNV-1a over the canonical address bytes.
pub fn site_key(v: &Vertex) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for b in v.up().to_le_bytes() {
        eat(b);
    }
    eat(0xff);
    for &b in v.word() {
        eat(b);
    }
    h
}

/// Stream factory for one (seed, replica) pair.
#[derive(Debug, Clone, Copy)]
pub struct StreamKeys {
    pub seed: u64,
    pub replica: u64,
}

impl StreamKeys {
    pub fn new(seed: u64, replica: u64) -> Self {
        StreamKeys { seed, replica }
    }

    fn rng(&self, tag: u64, lane2: u64, lane3: u64) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        bytes[0..8].copy_from_slice(&(self.seed ^ tag).to_le_bytes());
        bytes[8..16].copy_from_slice(&self.replica.to_le_bytes());
        bytes[16..24].copy_from_slice(&lane2.to_le_bytes());
        bytes[24..32].copy_from_slice(&lane3.to_le_bytes());
        ChaCha8Rng::from_seed(bytes)
    }

    /// Stream that decides the sleeping count at a site. One per site.
    pub fn count_rng(&self, site: &Vertex) -> ChaCha8Rng {
        self.rng(TAG_COUNT, site_key(site), 0)
    }

    /// Stream driving the walk of one particle, keyed by its waking site.
    pub fn walk_rng(&self, site: &Vertex, particle: u64) -> ChaCha8Rng {
        self.rng(TAG_WALK, site_key(site), particle)
    }

    /// Stream keyed by a plain counter, for particles with no site identity
    /// (branching offspring in couplings).
    pub fn generic_rng(&self, index: u64) -> ChaCha8Rng {
        self.rng(TAG_GENERIC, index, 0)
    }
}
