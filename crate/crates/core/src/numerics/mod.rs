//! Dense linear algebra, the seeded generator, spectral radius estimation
//! and ridge regression.

mod matrix;
mod ridge;
mod rng;
mod spectral;

pub use matrix::Matrix;
pub use ridge::{cholesky_solve, ridge_solve, NormalEquations};
pub use rng::{uniform_matrix, Rng};
pub use spectral::{scale_to_radius, spectral_radius, POWER_ITERATIONS};

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Euclidean distance between two equally sized slices.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
