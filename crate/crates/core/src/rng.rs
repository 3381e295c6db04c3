//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `seed_from_u64(base_seed)`.
//! Replica `r` uses ChaCha stream number `r` under that key, so replicas never
//! share keystream and any single replica can be regenerated on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream reserved for pilot runs of the window-sizing policy.
pub const PILOT_STREAM: u64 = u64::MAX;

pub fn stream(base_seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

pub fn replica_stream(base_seed: u64, replica: u64) -> Stream {
    stream(base_seed, replica)
}
