use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::Matrix;

/// Seeded random stream.
///
/// Backed by ChaCha8 seeded through `seed_from_u64`; uniform doubles take the
/// top 53 bits of each 64-bit output. Both choices are frozen so that result
/// files stay reproducible across releases.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Matrix with i.i.d. entries uniform on `[-sigma, sigma]`, filled row by row.
pub fn uniform_matrix(rng: &mut Rng, rows: usize, cols: usize, sigma: f64) -> Matrix {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for x in m.row_mut(i) {
            *x = rng.uniform(-sigma, sigma);
        }
    }
    m
}
