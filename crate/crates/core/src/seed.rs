//! Seeded randomness. Every random draw in the crate goes through a
//! `ChaCha8Rng` built here so results are reproducible across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer over `base ^ tag`, used to derive independent
/// sub-seeds from one master seed.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One seed per randomized pipeline step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedBundle {
    pub cluster: u64,
    pub split: u64,
    pub probe: u64,
    pub plft: u64,
    pub clsft: u64,
    pub subsample: u64,
}

impl SeedBundle {
    pub fn from_master(seed: u64) -> Self {
        SeedBundle {
            cluster: derive_seed(seed, 1),
            split: derive_seed(seed, 2),
            probe: derive_seed(seed, 3),
            plft: derive_seed(seed, 4),
            clsft: derive_seed(seed, 5),
            subsample: derive_seed(seed, 6),
        }
    }
}

impl Default for SeedBundle {
    fn default() -> Self {
        SeedBundle::from_master(0)
    }
}
