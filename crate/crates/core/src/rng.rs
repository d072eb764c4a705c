//! Deterministic seed derivation and per-task random streams.
//!
//! Every independent unit of randomized work (bootstrap replicate, Monte
//! Carlo replicate, yearly window) draws from its own ChaCha stream
//! addressed by `(seed, stream index)`. Streams never depend on the
//! scheduling of parallel work, so identical seeds give bitwise identical
//! results at any thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a tag (year, cell index,
/// replicate index, ...). Used to build nested seed hierarchies.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed).wrapping_add(splitmix64(tag ^ 0x9E37_79B9_7F4A_7C15)))
}

/// ChaCha generator keyed by `seed` positioned on an independent stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
