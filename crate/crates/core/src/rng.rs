//! Seeded random streams.
//!
//! Every replicate draws from its own ChaCha stream keyed by the experiment
//! seed and the replicate's coordinates, so results do not depend on which
//! thread ran which replicate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `seed` at the coordinates `key` (e.g. `[sweep_point, replicate]`).
pub fn stream(seed: u64, key: &[u64]) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    let id = key
        .iter()
        .fold(0x5bd1_e995_u64, |acc, &k| splitmix64(acc ^ splitmix64(k)));
    rng.set_stream(id);
    rng
}
