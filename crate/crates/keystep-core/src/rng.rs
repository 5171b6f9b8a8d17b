//! Seed derivation for independent, reproducible RNG streams.
//!
//! Every parallel unit of work (a fold, a generated take) owns a ChaCha
//! stream derived from the base seed and a stream index, so the schedule
//! of workers never changes the numbers drawn.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// Derive an independent stream seed from a base seed and a stream index.
///
/// Uses a splitmix64 finalizer over the mixed inputs rather than plain
/// addition, so nearby base seeds do not produce overlapping streams.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic ChaCha8 generator for a seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for stream `stream` of base seed `base`.
pub fn stream_rng(base: u64, stream: u64) -> ChaCha8Rng {
    seeded_rng(derive_seed(base, stream))
}
