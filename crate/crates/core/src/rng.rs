//! Seed derivation and the single random generator used across the crate.
//!
//! Every random draw in the crate comes from [`ChaCha8Rng`], a counter-based
//! stream cipher generator with a portable, platform-independent output
//! stream. Per-job seeds are derived with [`mix_seed`] so that results do not
//! depend on which thread ran a job or in which order jobs completed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes. Stable across platforms and releases,
/// unlike `std::collections::hash_map::DefaultHasher`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-cell seed: `mix(experiment_seed, hash(model_id), hash(target))`.
pub fn mix_seed(experiment_seed: u64, model_id: &str, target: &str) -> u64 {
    let h = splitmix64(experiment_seed);
    let h = splitmix64(h ^ fnv1a64(model_id.as_bytes()));
    splitmix64(h ^ fnv1a64(target.as_bytes()))
}

/// Derives the seed of the `index`-th child stream of `seed`.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
