//! Seed splitting.
//!
//! Every random quantity is drawn from a ChaCha8 stream whose seed is derived
//! from a master seed and a path of stream labels:
//!
//! ```text
//! seed(master, [l1, l2, ...]) = mix(...mix(mix(master, l1), l2)...)
//! ```
//!
//! where `mix` is the SplitMix64 finaliser applied to `state ^ rotl(label, 17)
//! + golden`. Streams depend only on their labels, never on the order in which
//! they are created, so serial and parallel runs draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub mod label {
    pub const SPLIT: u64 = 0x5350_4c49;
    pub const CANDIDATE: u64 = 0x4341_4e44;
    pub const MC_BLOCK: u64 = 0x4d43_424b;
    pub const PROBE: u64 = 0x5052_4f42;
    pub const CLASS: u64 = 0x434c_4153;
    pub const MIXING: u64 = 0x4d49_5849;
    pub const FACTORS: u64 = 0x4641_4354;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const REPLICATION: u64 = 0x5245_504c;
    pub const IMPORTANCE: u64 = 0x494d_5054;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of labels.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(seed.wrapping_add(GOLDEN)), |s, &l| {
        splitmix((s ^ l.rotate_left(17)).wrapping_add(GOLDEN))
    })
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive(seed, path))
}
