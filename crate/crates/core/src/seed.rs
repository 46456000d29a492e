//! Seed derivation shared by every randomized component.
//!
//! Every replication, class, tree and MCD start gets its own stream,
//! derived from a parent seed and an index with a single wrapping multiply
//! and xor. The result depends only on `(seed, index)`, so work can be
//! scheduled in any order without changing any output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fractional part of the golden ratio scaled to 64 bits.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// `seed XOR (GOLDEN_GAMMA * (index + 1))` in wrapping 64-bit arithmetic.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed ^ GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))
}

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
