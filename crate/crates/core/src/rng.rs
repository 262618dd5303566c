//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit 64-bit seed and builds its own
//! [`SimRng`]. Sub-streams for experiment cells are derived with
//! [`derive_seed`], a SplitMix64 fold over the cell coordinates, so the stream
//! of one cell never depends on which other cells exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SimRng = ChaCha8Rng;

/// Name recorded in run manifests.
pub const PRNG_NAME: &str = "ChaCha8 (rand_chacha 0.9) + ziggurat StandardNormal (rand_distr 0.5)";

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `h = splitmix64(master)`, then `h = splitmix64(h ^ c)` for each coordinate.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(master), |h, &c| splitmix64(h ^ c))
}

#[inline]
pub fn standard_normal(rng: &mut SimRng) -> f64 {
    StandardNormal.sample(rng)
}
