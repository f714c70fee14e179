//! Reproducible random streams.
//!
//! Every stochastic routine takes an explicit `&mut impl Rng`. Replicas get
//! their own ChaCha8 stream: replica `k` of a run with master seed `s` uses
//! the key derived from `s` and stream id `k`, so the streams never overlap
//! and a replica's draws do not depend on how many other replicas exist or
//! on the thread that runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a parent seed and a tag (splitmix64 finalizer).
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    let mut z = parent.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(tag.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeds handed to replicas `0..n` of a run.
pub fn replica_seeds(master_seed: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|k| derive_seed(master_seed, k)).collect()
}
