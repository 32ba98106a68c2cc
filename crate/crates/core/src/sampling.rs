//! Deterministic seeded sampling shared by every verification sweep.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 42;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a stream index so independent sweeps never share draws.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn uniform_in_box(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds
        .iter()
        .map(|&(lo, hi)| {
            if hi > lo {
                Uniform::new(lo, hi).sample(rng)
            } else {
                lo
            }
        })
        .collect()
}

pub fn uniform_cube(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    let dist = Uniform::new(-radius, radius);
    (0..dim).map(|_| dist.sample(rng)).collect()
}
