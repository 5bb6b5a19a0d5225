//! Named random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by
//! `(seed, domain)` and positioned on stream `(major << 32) | minor`.
//! Simulations use `major` = grid cell and `minor` = replicate; the bootstrap
//! uses `major` = 0 and `minor` = replicate. A replicate's draws therefore
//! depend only on its own coordinates, never on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Simulation = 0x5349_4d55,
    Bootstrap = 0x424f_4f54,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, domain: Domain, major: u32, minor: u32) -> ChaCha8Rng {
    let key = mix(seed ^ mix(domain as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream((u64::from(major) << 32) | u64::from(minor));
    rng
}
