//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream
//! addressed by `(seed, stream)`. Streams are independent keystreams of the
//! same key, so work split into blocks can be generated in any order, on any
//! number of threads, with bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `index` under `base` (trials, tree nodes, sub-experiments).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base) ^ mix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// The `stream`-th keystream of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
