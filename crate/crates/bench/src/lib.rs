//! Fixtures shared by the criterion benches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wsr_core::Density;

/// `n` draws from `truth` with a fixed seed.
pub fn sample(truth: &Density, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..n).map(|_| truth.sample(&mut rng)).collect()
}
