//! Seeded randomness.
//!
//! Every stochastic stage draws from ChaCha8 (`rand_chacha::ChaCha8Rng`)
//! seeded with the run seed through `seed_from_u64`. Stages are separated
//! by ChaCha stream ids rather than by re-hashing the seed, so the stream a
//! stage reads is fully determined by `(seed, stage)`:
//!
//! | stage              | stream            |
//! |--------------------|-------------------|
//! | corpus balancing   | 1                 |
//! | train/test + folds | 2                 |
//! | model fitting      | 3                 |
//! | Shapley background | 4                 |
//! | Shapley sampling   | 5                 |
//! | explained instances| 6                 |
//! | repeat `r`         | seed `seed + r`   |
//!
//! Shuffles use the Fisher-Yates routine below with rejection-sampled
//! bounded integers, not `rand`'s `SliceRandom`, so the permutation for a
//! given seed does not depend on `rand` internals.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const STREAM_BALANCE: u64 = 1;
pub const STREAM_SPLIT: u64 = 2;
pub const STREAM_FIT: u64 = 3;
pub const STREAM_BACKGROUND: u64 = 4;
pub const STREAM_SHAPLEY: u64 = 5;
pub const STREAM_INSTANCES: u64 = 6;

pub fn stage_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform integer in `0..bound` (bound > 0) by rejection sampling.
pub fn below(rng: &mut Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

/// Uniform float in `[0, 1)` with 53 bits of precision.
pub fn unit(rng: &mut Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn shuffle<T>(rng: &mut Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}
