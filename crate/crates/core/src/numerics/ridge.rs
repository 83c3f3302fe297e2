use super::Matrix;
use crate::error::{Error, Result};

/// Relative pivot threshold below which an unregularized system is declared
/// rank deficient.
const RANK_TOLERANCE: f64 = 1e-12;

/// Ridge regression `W = argmin Σ_s |y_s - φ_s W|² + beta |W|²_F`.
///
/// Solves `(ΦᵀΦ + beta I) W = ΦᵀY` with a Cholesky factorization. `beta` is
/// **not** multiplied by the sample count, so the same `beta` regularizes
/// more weakly as training sets grow. With `beta == 0` a singular `ΦᵀΦ` is
/// reported as [`Error::RankDeficient`]; there is no pseudo-inverse fallback.
pub fn ridge_solve(features: &Matrix, targets: &Matrix, beta: f64) -> Result<Matrix> {
    if features.rows() != targets.rows() {
        return Err(Error::Shape {
            op: "ridge_solve",
            expected: features.rows(),
            got: targets.rows(),
        });
    }
    let mut acc = NormalEquations::new(features.cols(), targets.cols());
    for (phi, y) in features.row_iter().zip(targets.row_iter()) {
        acc.add(phi, y);
    }
    acc.solve(beta)
}

/// Streaming accumulator for `ΦᵀΦ` and `ΦᵀY`.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    gram: Matrix,
    rhs: Matrix,
    samples: usize,
}

impl NormalEquations {
    pub fn new(features: usize, outputs: usize) -> Self {
        Self {
            gram: Matrix::zeros(features, features),
            rhs: Matrix::zeros(features, outputs),
            samples: 0,
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Adds one sample; only the upper triangle of the Gram matrix is kept
    /// until [`solve`](Self::solve).
    pub fn add(&mut self, phi: &[f64], y: &[f64]) {
        debug_assert_eq!(phi.len(), self.gram.rows());
        debug_assert_eq!(y.len(), self.rhs.cols());
        for (j, a) in phi.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            let g = &mut self.gram.row_mut(j)[j..];
            for (g_jk, b) in g.iter_mut().zip(&phi[j..]) {
                *g_jk += a * b;
            }
            for (r, yv) in self.rhs.row_mut(j).iter_mut().zip(y) {
                *r += a * yv;
            }
        }
        self.samples += 1;
    }

    pub fn solve(&self, beta: f64) -> Result<Matrix> {
        let d = self.gram.rows();
        if self.samples == 0 || d == 0 {
            return Err(Error::InvalidArgument("ridge_solve needs at least one sample and one feature"));
        }
        if !(beta >= 0.0) {
            return Err(Error::InvalidArgument("beta must be >= 0"));
        }
        let mut gram = self.gram.clone();
        for j in 0..d {
            gram[(j, j)] += beta;
            for k in 0..j {
                gram[(j, k)] = gram[(k, j)];
            }
        }
        cholesky_solve(gram, self.rhs.clone())
    }
}

/// Solves `a x = b` for symmetric positive definite `a` (consumed as scratch).
pub fn cholesky_solve(mut a: Matrix, mut b: Matrix) -> Result<Matrix> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::NotSquare {
            op: "cholesky_solve",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if b.rows() != n {
        return Err(Error::Shape {
            op: "cholesky_solve",
            expected: n,
            got: b.rows(),
        });
    }
    let scale = (0..n).fold(0.0, |m, i| f64::max(m, a[(i, i)].abs()));
    let tol = RANK_TOLERANCE * scale.max(f64::MIN_POSITIVE);

    // Lower factor overwrites the lower triangle of `a`.
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= a[(j, k)] * a[(j, k)];
        }
        if !(d > tol) {
            return Err(Error::RankDeficient { column: j, pivot: d });
        }
        let d = libm::sqrt(d);
        a[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            let (ri, rj) = (i * n, j * n);
            let data = a.as_slice();
            for k in 0..j {
                s -= data[ri + k] * data[rj + k];
            }
            a[(i, j)] = s / d;
        }
    }

    let m = b.cols();
    // forward: L z = b
    for i in 0..n {
        for k in 0..i {
            let l = a[(i, k)];
            if l != 0.0 {
                for c in 0..m {
                    let v = b[(k, c)];
                    b[(i, c)] -= l * v;
                }
            }
        }
        let d = a[(i, i)];
        b.row_mut(i).iter_mut().for_each(|x| *x /= d);
    }
    // backward: Lᵀ x = z
    for i in (0..n).rev() {
        for k in i + 1..n {
            let l = a[(k, i)];
            if l != 0.0 {
                for c in 0..m {
                    let v = b[(k, c)];
                    b[(i, c)] -= l * v;
                }
            }
        }
        let d = a[(i, i)];
        b.row_mut(i).iter_mut().for_each(|x| *x /= d);
    }
    if !b.is_finite() {
        return Err(Error::RankDeficient {
            column: n,
            pivot: f64::NAN,
        });
    }
    Ok(b)
}
