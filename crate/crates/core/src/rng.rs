//! Seed derivation and RNG construction.
//!
//! Every random choice in the crate flows from a `u64` seed through
//! [`derive`], so independent subsystems (per-tree training streams,
//! per-query model selection, per-repeat experiments) get decorrelated
//! streams from one master seed and results are reproducible across runs
//! and thread schedules.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `(seed, stream)`.
pub fn derive(seed: u64, stream: u64) -> u64 {
    splitmix(splitmix(seed) ^ stream.wrapping_mul(0xA076_1D64_78BD_642F))
}

/// Derive a child seed from `(seed, a, b)`.
pub fn derive2(seed: u64, a: u64, b: u64) -> u64 {
    derive(derive(seed, a), b)
}

/// Seeded RNG used throughout the crate.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
