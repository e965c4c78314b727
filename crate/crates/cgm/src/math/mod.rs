//! Numerical support: error functions, adaptive quadrature, compensated
//! summation, and jittered Cholesky factorization.

pub mod erf;
pub mod quad;

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, Dyn};

/// Kahan-compensated running sum. Reductions over realizations use this in a
/// fixed index order so parallel and serial runs produce identical bits.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Mean and standard error of a sample, via compensated sums.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mut s = KahanSum::default();
    for &x in xs {
        s.add(x);
    }
    let mean = s.value() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq = KahanSum::default();
    for &x in xs {
        sq.add((x - mean) * (x - mean));
    }
    let var = sq.value() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Diagonal jitter ladder used whenever an exponential covariance matrix
/// turns out numerically semidefinite (coincident or near-coincident points).
pub const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky factorization with escalating diagonal jitter.
pub fn cholesky_with_jitter(matrix: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = Cholesky::new(matrix.clone()) {
        return Ok(chol);
    }
    let n = matrix.nrows();
    for &jitter in &JITTER_LADDER {
        let mut m = matrix.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok(chol);
        }
    }
    Err(Error::DegenerateCovariance)
}
