//! Seed discipline: every random stream is derived from
//! `(master seed, stage, unit index)` so results never depend on thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// FNV-1a; stable across builds and platforms.
fn stage_hash(stage: &str) -> u64 {
    stage.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3))
}

/// Derive the seed of one unit of work.
pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    let a = splitmix64(master ^ stage_hash(stage));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Random stream for one unit of work.
pub fn stream(master: u64, stage: &str, index: u64) -> Stream {
    Stream::seed_from_u64(derive_seed(master, stage, index))
}
