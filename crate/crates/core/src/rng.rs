//! Seed plumbing for reproducible pipelines.
//!
//! Every stage takes an explicit 64-bit seed. Per-item streams (one per
//! generated sample, one per training epoch, ...) are derived by mixing
//! the stage seed with the item index through SplitMix64, so items are
//! independent of generation order and safe to produce in parallel.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer. Maps a 64-bit value to a well-scrambled 64-bit
/// value; consecutive inputs give statistically independent outputs.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed from a parent seed and an item index.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Deterministic stream cipher RNG for a given seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
