//! Seeded random streams.
//!
//! Every random draw in the crate comes from a xoshiro256** generator whose
//! 256-bit state is expanded from a 64-bit seed by splitmix64. Components
//! never share a generator: each asks for a named substream of the run seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256StarStar;

pub type Prng = Xoshiro256StarStar;

/// Substream names used across the crate.
pub const DATA: &str = "data";
pub const WEIGHTS: &str = "weights";
pub const PERMUTATIONS: &str = "permutations";

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Generator seeded directly from `seed` (splitmix64 expansion).
pub fn from_seed(seed: u64) -> Prng {
    Prng::seed_from_u64(seed)
}

/// Named substream of a run seed.
pub fn stream(seed: u64, name: &str) -> Prng {
    Prng::seed_from_u64(seed ^ fnv1a(name.as_bytes()))
}

/// Indexed child of a named substream, e.g. one per trial or per seed.
pub fn child(seed: u64, name: &str, index: u64) -> Prng {
    let base = seed ^ fnv1a(name.as_bytes());
    Prng::seed_from_u64(base.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

pub fn normal(rng: &mut Prng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn uniform(rng: &mut Prng) -> f64 {
    rng.random::<f64>()
}

pub fn range(rng: &mut Prng, lo: usize, hi_inclusive: usize) -> usize {
    rng.random_range(lo..=hi_inclusive)
}

pub fn shuffle<T>(rng: &mut Prng, items: &mut [T]) {
    items.shuffle(rng);
}
