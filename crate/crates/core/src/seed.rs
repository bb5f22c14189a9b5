//! Hierarchical seeding.
//!
//! Every random draw in a run comes from a stream addressed by a path such
//! as `master → round → device`. Streams are independent of the order in
//! which they are opened, so per-device work can be scheduled in any order
//! without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags that sit beside the per-device indices of a round.
pub mod tag {
    pub const CHANNEL: u64 = u64::MAX;
    pub const NOISE: u64 = u64::MAX - 1;
    pub const SERVER: u64 = u64::MAX - 2;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree(u64);

impl SeedTree {
    pub fn new(master: u64) -> Self {
        SeedTree(master)
    }

    pub fn seed(&self) -> u64 {
        self.0
    }

    pub fn child(&self, index: u64) -> SeedTree {
        SeedTree(splitmix64(self.0 ^ splitmix64(index.wrapping_add(0x6a09_e667_f3bc_c909))))
    }

    pub fn rng(&self) -> SimRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
