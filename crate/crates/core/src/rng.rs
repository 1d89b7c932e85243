//! Counter-derived random streams.
//!
//! Every random quantity is keyed by integers (master seed, cell, replication,
//! draw) rather than by the order in which work is scheduled, so results do
//! not depend on the number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine a sequence of keys into one seed.
pub fn mix_seed(keys: &[u64]) -> u64 {
    keys.iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream index of retry `attempt` (0 = first try) for draw `j`.
pub fn retry_stream(j: u64, attempt: u64) -> u64 {
    (attempt << 40) | j
}
