use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seeded white-noise generator description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSource {
    pub seed: u64,
    pub length: usize,
}

impl NoiseSource {
    pub fn new(seed: u64, length: usize) -> Self {
        Self { seed, length }
    }

    /// A source seeded from the OS entropy pool.
    pub fn fresh(length: usize) -> Self {
        Self {
            seed: rand::random(),
            length,
        }
    }
}

/// Uniform samples on [−1, 1]; identical `(seed, length)` gives identical output.
pub fn white_noise(src: &NoiseSource) -> Result<Vec<f64>> {
    if src.length == 0 {
        return Err(Error::Empty("noise length"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(src.seed);
    Ok((0..src.length).map(|_| rng.gen_range(-1.0..=1.0)).collect())
}
