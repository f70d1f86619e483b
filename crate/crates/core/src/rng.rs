//! Seeding helpers.
//!
//! Every random stream in the crate is a `Xoshiro256PlusPlus` generator whose
//! 256-bit state is expanded from a `u64` with SplitMix64 (the expansion used by
//! `SeedableRng::seed_from_u64` for this generator). Gaussian draws use the
//! ziggurat sampler of `rand_distr::StandardNormal`. Both algorithms are fully
//! specified and use only integer arithmetic plus IEEE-754 operations, so the
//! same seed produces the same stream on every platform.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SketchRng = Xoshiro256PlusPlus;

pub fn rng_from_seed(seed: u64) -> SketchRng {
    SketchRng::seed_from_u64(seed)
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The `index`-th output of a SplitMix64 stream started at `master`.
///
/// Child seeds depend only on `(master, index)`, so spawning is prefix-stable:
/// the first k children are the same whatever the total count requested.
pub fn child_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// Named sub-streams of one root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Hashing = 1,
    DataOrder = 2,
    Sampling = 3,
    ModelInit = 4,
    Synthesis = 5,
    Split = 6,
}

pub fn stream_seed(root: u64, stream: Stream) -> u64 {
    child_seed(mix64(root ^ 0x6e77_735f_726f_6f74), stream as u64)
}
