//! Deterministic random streams.
//!
//! Every replication draws from its own ChaCha8 stream addressed by
//! `(master seed, cell, replication, sub-stream)`. The keystream position is
//! a pure function of that address, so serial and parallel runs agree
//! bit for bit regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer, used to decorrelate neighbouring seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Address of one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master: u64,
    pub cell: u32,
    pub replication: u64,
    pub sub: u32,
}

impl StreamKey {
    pub fn new(master: u64, cell: u32, replication: u64, sub: u32) -> Self {
        Self {
            master,
            cell,
            replication,
            sub,
        }
    }

    /// Builds the generator for this address.
    pub fn rng(&self) -> ChaCha8Rng {
        let seed = mix64(self.master ^ mix64(u64::from(self.cell) + 1));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(mix64(self.replication) ^ (u64::from(self.sub) << 1));
        rng
    }
}

/// Generator for a plain user seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
