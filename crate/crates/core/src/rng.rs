//! Counter-based seed derivation.
//!
//! Every independent piece of randomness in a simulation is addressed by
//! `(master seed, stream tag, index)`. The ChaCha stream id carries the
//! index, so trial `i` always sees the same numbers no matter which worker
//! runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a short ASCII tag into a 64-bit stream key.
pub fn tag(name: &str) -> u64 {
    name.bytes()
        .fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
        })
}

/// Generator for item `index` of the stream `stream` under `seed`.
pub fn derive(seed: u64, stream: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(stream)));
    rng.set_stream(index);
    rng
}
