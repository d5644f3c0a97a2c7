//! Seed derivation.
//!
//! Each subsystem owns one of the four experiment seeds. Per-round and
//! per-vehicle generators are derived from it by mixing in a stream tag so
//! that drawing more numbers in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator seeded directly from `seed`.
pub fn rng_from(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Generator for a named sub-stream of `seed`, e.g. `(round, vehicle)`.
pub fn derive(seed: u64, stream: &[u64]) -> SimRng {
    let mut s = mix(seed);
    for &tag in stream {
        s = mix(s ^ mix(tag.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    SimRng::seed_from_u64(s)
}

/// Plain seed for a sub-stream, for APIs that take a `u64` seed.
pub fn sub_seed(seed: u64, stream: &[u64]) -> u64 {
    use rand::Rng;
    derive(seed, stream).random()
}
