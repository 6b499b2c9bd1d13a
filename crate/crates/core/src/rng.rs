//! Seed derivation for reproducible, schedule-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `seed`, giving a new seed that depends on every part
/// and on their order.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(seed), |acc, &p| mix64(acc ^ mix64(p)))
}

/// An independent generator for the stream identified by `parts`.
pub fn stream(seed: u64, parts: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, parts))
}
