//! Counter-keyed random streams.
//!
//! Every random draw in the solver comes from a generator keyed by
//! `(seed, k, i)`, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A generator determined entirely by `(seed, a, b)`.
pub fn keyed_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
    ChaCha8Rng::seed_from_u64(key)
}
