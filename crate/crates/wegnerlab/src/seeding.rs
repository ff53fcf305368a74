//! Deterministic stream derivation for Monte Carlo runs.
//!
//! Every random draw in this crate comes from a stream derived from a master
//! seed plus a path of indices (realization, site, ...). Streams for distinct
//! paths are statistically independent and do not depend on iteration order or
//! on how work is scheduled across threads, which is what makes result tables
//! bit-reproducible for a fixed master seed regardless of the worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; full-period mixing of a 64-bit state.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed and an index path into a single 64-bit key.
pub fn mix(master_seed: u64, path: &[u64]) -> u64 {
    let mut state = master_seed;
    let mut acc = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xd6e8_feb8_6659_fd93);
        acc ^= splitmix64(&mut state);
    }
    acc
}

/// A seeded random stream addressed by `(master_seed, path...)`.
///
/// Distinct paths yield independent ChaCha8 streams; the same path always
/// yields the same stream.
pub fn substream(master_seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(master_seed, path));
    // Fold the path length in as the ChaCha stream id so that prefix paths
    // ([a] vs [a, 0]) cannot collide.
    rng.set_stream(path.len() as u64);
    rng
}
