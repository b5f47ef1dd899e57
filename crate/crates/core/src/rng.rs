//! Deterministic random streams.
//!
//! Every random component draws from its own ChaCha8 stream whose seed is a
//! pure function of the master seed and a path of integer identifiers
//! (component id, cell index, replicate index, ...). Work can therefore be
//! scheduled on any number of threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Component identifiers used as the first element of a derivation path.
pub mod component {
    pub const GRAPH: u64 = 1;
    pub const DGP: u64 = 2;
    pub const TRUTH: u64 = 3;
    pub const CHAIN: u64 = 4;
    pub const ASSIGNMENT: u64 = 5;
    pub const FIT: u64 = 6;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds `path` into `master` with SplitMix64 finalisation at each step.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
