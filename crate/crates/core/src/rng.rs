//! Seed streams. Every stochastic component draws from a ChaCha8 stream keyed by
//! a 64-bit seed, and sub-streams are derived by mixing, so results depend only
//! on the master seed and the position in the experiment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed for item `index` of the stream rooted at `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ mix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Seed derived along a path of indices, e.g. `[grid point, replication]`.
pub fn derive_seed_path(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |acc, &i| derive_seed(acc, i))
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named sub-stream tags, so that e.g. data generation and Z_M probing never share draws.
pub mod tag {
    pub const DATA: u64 = 1;
    pub const POPULATION: u64 = 2;
    pub const PROBES: u64 = 3;
    pub const ARE: u64 = 4;
    pub const ORACLE: u64 = 5;
    pub const NOISE_MOMENT: u64 = 6;
}
