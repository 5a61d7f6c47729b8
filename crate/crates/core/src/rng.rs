//! Seed plumbing. Every random draw in the crate comes from a ChaCha stream
//! addressed by `(seed, stream)`, so independent consumers never overlap and
//! reruns are bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers shared by samplers so that expectations evaluated
/// within one drift call see common random numbers.
pub mod streams {
    pub const DATA: u64 = 1;
    pub const LATENT: u64 = 2;
    pub const MIX: u64 = 3;
    pub const MEASURE: u64 = 4;
    pub const PROBE: u64 = 5;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed, e.g. a per-step seed from a root seed.
pub fn child_seed(root: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = root ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
