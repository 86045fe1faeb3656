//! Seed derivation for reproducible, independently streamed randomness.
//!
//! Every stage that needs randomness derives its own stream from a parent
//! seed and a stream index, so stages can run in any order (or in
//! parallel) without perturbing each other's draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mix a parent seed with a stream index into a new 64-bit seed.
///
/// Uses the splitmix64 finalizer, which decorrelates nearby inputs well
/// enough that `(seed, 0)`, `(seed, 1)`, ... behave as unrelated seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A ChaCha generator for the given `(seed, stream)` pair.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}
