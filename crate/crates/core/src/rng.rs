//! Reproducible random streams.
//!
//! Every draw, replicate, or pilot sample gets its own generator seeded from
//! `(master seed, stream, index)`, so results do not depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers; distinct streams never share generator state.
pub mod streams {
    pub const BAND: u64 = 0x42;
    pub const ALPHA_SE: u64 = 0xA1;
    pub const REPLICATE: u64 = 0x5E;
    pub const TEST_SAMPLE: u64 = 0x7E;
    pub const PILOT: u64 = 0x91;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

pub fn stream_rng(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}
