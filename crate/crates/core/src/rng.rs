//! Seeded randomness.
//!
//! Every random decision in the pipeline flows from a single `u64` seed through
//! ChaCha8 (`rand_chacha`, seeded with `SeedableRng::seed_from_u64`). Shuffles use
//! an explicit Fisher–Yates pass with Lemire's multiply-and-reject bounded
//! sampling over `next_u64`, so partitions do not depend on the shuffle helpers
//! of any particular `rand` release.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator for `seed`; stream 0 equals [`seeded`].
pub fn seeded_stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = seeded(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform integer in `0..bound` (`bound > 0`).
pub fn below<R: RngCore>(rng: &mut R, bound: u64) -> u64 {
    assert!(bound > 0, "empty range");
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let wide = u128::from(rng.next_u64()) * u128::from(bound);
        if (wide as u64) >= threshold {
            return (wide >> 64) as u64;
        }
    }
}

/// In-place Fisher–Yates shuffle: for `i` from `n-1` down to `1`, swap `i`
/// with a uniform `j` in `0..=i`.
pub fn shuffle<T, R: RngCore>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Normal sample with standard deviation `std`, redrawn until it falls within
/// two standard deviations of zero.
pub fn truncated_normal<R: Rng>(rng: &mut R, std: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 2.0 {
            return z * std;
        }
    }
}
