//! RBF kernel, Gram matrices, and the double-centered kernel correlation
//! matrix used for dataset diagnostics.

use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::{real, Real};

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("kernel width sigma must be strictly positive")]
    InvalidSigma,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("centered diagonal entry {index} is not positive; point is indistinguishable from the mean embedding")]
    DegenerateDiagonal { index: usize },
}

/// Gaussian similarity `exp(-||a-b||^2 / (2 sigma^2))`; 1 at zero distance,
/// decaying toward 0.
pub fn rbf_kernel<T: Real>(a: &[T], b: &[T], sigma: T) -> Result<T, KernelError> {
    if a.len() != b.len() {
        return Err(KernelError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(KernelError::InvalidSigma);
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(KernelError::NonFiniteInput);
    }
    Ok(rbf_unchecked(a, b, sigma))
}

/// Same as [`rbf_kernel`] without validation; callers must have checked
/// finiteness and sigma once up front. Used by the SVR hot loops.
#[inline]
pub(crate) fn rbf_unchecked<T: Real>(a: &[T], b: &[T], sigma: T) -> T {
    let mut sq = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        sq += d * d;
    }
    (-sq / (real::<T>(2.0) * sigma * sigma)).exp()
}

/// Pairwise kernel matrix of the rows of `x`. Exactly symmetric with unit
/// diagonal by construction.
pub fn gram_matrix<T: Real>(x: &Matrix<T>, sigma: T) -> Result<Matrix<T>, KernelError> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(KernelError::InvalidSigma);
    }
    if !x.is_finite() {
        return Err(KernelError::NonFiniteInput);
    }
    let n = x.rows();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        g.set(i, i, T::one());
        for j in i + 1..n {
            let k = rbf_unchecked(x.row(i), x.row(j), sigma);
            g.set(i, j, k);
            g.set(j, i, k);
        }
    }
    Ok(g)
}

/// Normalizes a Gram matrix into correlations: double-center it (subtract
/// row and column means, add back the grand mean), then scale each entry by
/// the square roots of the centered diagonal.
///
/// The result reads like a correlation matrix over the implicit feature
/// embeddings: unit diagonal, entries in [-1, 1].
pub fn kernel_correlation_matrix<T: Real>(gram: &Matrix<T>) -> Result<Matrix<T>, KernelError> {
    let n = gram.rows();
    if gram.cols() != n {
        return Err(KernelError::DimensionMismatch {
            expected: n,
            got: gram.cols(),
        });
    }
    if n < 2 {
        return Err(KernelError::TooFewPoints { needed: 2, got: n });
    }
    if !gram.is_finite() {
        return Err(KernelError::NonFiniteInput);
    }
    for i in 0..n {
        for j in i + 1..n {
            if gram.get(i, j) != gram.get(j, i) {
                return Err(KernelError::NotSymmetric { i, j });
            }
        }
    }

    let nf = real::<T>(n as f64);
    let mut row_means = vec![T::zero(); n];
    let mut grand = T::zero();
    for i in 0..n {
        let mut s = T::zero();
        for j in 0..n {
            s += gram.get(i, j);
        }
        row_means[i] = s / nf;
        grand += s;
    }
    grand = grand / (nf * nf);

    // Symmetric input means column means equal row means.
    let mut centered = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            centered.set(i, j, gram.get(i, j) - row_means[i] - row_means[j] + grand);
        }
    }

    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let d = centered.get(i, i);
        if !(d > T::zero()) {
            return Err(KernelError::DegenerateDiagonal { index: i });
        }
        scale.push(d.sqrt());
    }
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, centered.get(i, j) / (scale[i] * scale[j]));
        }
    }
    Ok(out)
}
