//! Seeded random streams.
//!
//! Every stochastic component draws from its own [`ChaCha8Rng`] whose seed is
//! derived from a root seed and a path of stream labels. Derivation is a pure
//! function, so parallel and serial schedules see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream labels. Keeping them in one place avoids accidental reuse.
pub mod stream {
    pub const PLANT_INIT: u64 = 0x01;
    pub const PLANT_NOISE: u64 = 0x02;
    pub const LINK: u64 = 0x03;
    pub const DELAY: u64 = 0x04;
    pub const CEM_SAMPLE: u64 = 0x10;
    pub const CEM_EVAL: u64 = 0x11;
    pub const SCHED_FADING: u64 = 0x20;
    pub const SCHED_DROP: u64 = 0x21;
    pub const SCHED_PHASE: u64 = 0x22;
    pub const EPISODE: u64 = 0x30;
    pub const VALIDATION: u64 = 0x31;
    pub const ESTIMATOR_DATA: u64 = 0x40;
    pub const TRAIN_EPISODE: u64 = 0x41;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a sequence of labels.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn rng_from(seed: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(seed, path))
}
