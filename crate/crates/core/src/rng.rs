//! Counter-based random streams.
//!
//! Every stochastic quantity draws from its own ChaCha stream, selected by the
//! run seed and a tag identifying the consumer (link, scatterer, packet, ...).
//! Results therefore do not depend on evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the different consumers.
pub mod tag {
    pub const DIFFUSE_PLACEMENT: u64 = 1;
    pub const FADING: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const SOUNDING: u64 = 4;
    pub const PAYLOAD: u64 = 5;
    pub const LINK_NOISE: u64 = 6;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Returns an independent generator for `(seed, tag...)`.
pub fn stream(seed: u64, tag: &[u64]) -> ChaCha8Rng {
    let id = tag
        .iter()
        .fold(0x2545_f491_4f6c_dd1d_u64, |acc, &t| splitmix(acc ^ splitmix(t)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
