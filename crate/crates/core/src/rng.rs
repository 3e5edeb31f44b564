//! Seed derivation. Every random stream in the toolkit is a ChaCha8
//! generator seeded from a `(base, stream)` pair so runs are reproducible
//! and independent streams never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream index into a new seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_add(0x5EED)))
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) mod stream {
    pub const SOURCE_DRAW: u64 = 1;
    pub const TARGET_DRAW: u64 = 2;
    pub const SOURCE_SPLIT: u64 = 3;
    pub const TARGET_SPLIT: u64 = 4;
    pub const INIT: u64 = 10;
    pub const BATCHES: u64 = 11;
    pub const ROUND: u64 = 20;
    pub const SELECT: u64 = 21;
    pub const EMOC_EVAL: u64 = 22;
    pub const AUGMENT: u64 = 30;
}
