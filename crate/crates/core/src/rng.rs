//! Seed derivation and random-draw helpers.
//!
//! Every randomized routine in the crate takes a 64-bit seed and derives any
//! sub-streams it needs through [`derive_seed`]. Sub-streams depend only on
//! (seed, stream index), so work can be split across threads without changing
//! results.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed from a master seed and a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// The deterministic generator used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One standard-normal draw via the Box-Muller transform (two uniforms per call).
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // 1 - u keeps the argument of ln strictly positive.
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v: f64 = rng.gen::<f64>();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Deterministic Fisher-Yates shuffle of `0..n` driven by `seed`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng_from_seed(seed));
    indices
}
