//! Dense linear-algebra helpers: symmetric eigen solves and power iteration.
//!
//! Eigen problems are solved in f64 regardless of the working scalar; they
//! feed kernel detection and spectra, where extra precision is free.

use ndarray::Array2;

use crate::dec::CsrMatrix;
use crate::error::{GvfError, Result};
use crate::scalar::Real;

/// Ascending eigenvalues of a symmetric sparse matrix (dense solve).
pub fn symmetric_eigenvalues<T: Real>(matrix: &CsrMatrix<T>) -> Result<Vec<f64>> {
    if matrix.nrows() == 0 {
        return Ok(Vec::new());
    }
    let dense = matrix.to_dense_f64();
    let eig = dense.symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(GvfError::EigenFailure("non-finite eigenvalue".into()));
    }
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(vals)
}

/// Full symmetric eigendecomposition; returns (ascending eigenvalues,
/// matching eigenvectors as columns).
pub fn symmetric_eigen<T: Real>(matrix: &CsrMatrix<T>) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if matrix.nrows() == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let dense = matrix.to_dense_f64();
    let eig = dense.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    Ok((vals, vecs))
}

/// Largest eigenvalue of a symmetric PSD sparse matrix by power iteration.
pub fn power_iteration_sym<T: Real>(matrix: &CsrMatrix<T>, iters: usize) -> f64 {
    let n = matrix.nrows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic start, slightly uneven so it is not orthogonal to the
    // top eigenvector by accident.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i % 7) as f64)).collect();
    let mut av = vec![0.0f64; n];
    let dense_free = |x: &[f64], y: &mut [f64]| {
        for r in 0..n {
            let mut acc = 0.0;
            for (c, val) in matrix.row(r) {
                acc += val.to_f64_lossy() * x[c];
            }
            y[r] = acc;
        }
    };
    let mut lambda = 0.0;
    for _ in 0..iters {
        dense_free(&v, &mut av);
        let norm = av.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for i in 0..n {
            v[i] = av[i] / norm;
        }
        lambda = norm;
    }
    // One Rayleigh quotient to polish.
    dense_free(&v, &mut av);
    let num: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().map(|a| a * a).sum();
    if den > 0.0 {
        lambda = num / den;
    }
    lambda.max(0.0)
}

/// Top singular value of a dense matrix by power iteration on `W^T W`.
pub fn spectral_norm_estimate<T: Real>(w: &Array2<T>, iters: usize) -> T {
    let (rows, cols) = w.dim();
    if rows == 0 || cols == 0 {
        return T::zero();
    }
    let mut v: Vec<T> = (0..cols)
        .map(|i| T::from_f64_lossy(1.0 + 0.01 * ((i % 7) as f64)))
        .collect();
    let mut wv = vec![T::zero(); rows];
    let mut wtwv = vec![T::zero(); cols];
    let mut sigma = T::zero();
    for _ in 0..iters {
        for r in 0..rows {
            let mut acc = T::zero();
            for c in 0..cols {
                acc += w[(r, c)] * v[c];
            }
            wv[r] = acc;
        }
        for c in 0..cols {
            let mut acc = T::zero();
            for r in 0..rows {
                acc += w[(r, c)] * wv[r];
            }
            wtwv[c] = acc;
        }
        let norm = wtwv
            .iter()
            .map(|&x| x * x)
            .fold(T::zero(), |a, b| a + b)
            .sqrt();
        if norm == T::zero() {
            return T::zero();
        }
        for c in 0..cols {
            v[c] = wtwv[c] / norm;
        }
        sigma = norm.sqrt();
    }
    sigma
}
