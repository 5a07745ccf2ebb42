//! ZCA whitening of the concatenated multimodal input.
//!
//! The transform is fit on a calibration split and applied as
//! `y = W (x - mean)` with `W = Sigma^{-1/2}`; a held-out split measures the
//! cross-modality covariance that survives, reported as `residual_delta`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::bundle::BundleConfig;
use crate::error::{GvfError, Result};
use crate::scalar::Real;

/// Eigenvalues at or below this fraction of the largest mark the covariance
/// as rank-deficient.
const RANK_CUT: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WhiteningTransform<T: Real> {
    pub mean: Array1<T>,
    /// Symmetric whitening matrix, applied on the right as `(x - mean) W^T`.
    pub matrix: Array2<T>,
    /// Frobenius norm of the cross-modality covariance blocks of whitened
    /// held-out data.
    pub residual_delta: T,
    /// Set when the covariance needed a ridge before inversion.
    pub regularized: bool,
}

impl<T: Real> WhiteningTransform<T> {
    /// Identity transform for pre-whitened pipelines and small tests.
    pub fn identity(dim: usize) -> Self {
        WhiteningTransform {
            mean: Array1::zeros(dim),
            matrix: Array2::eye(dim),
            residual_delta: T::zero(),
            regularized: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Whitens rows of `x`.
    pub fn apply(&self, x: &Array2<T>) -> Array2<T> {
        assert_eq!(x.ncols(), self.dim(), "whitening dimension mismatch");
        let centered = x - &self
            .mean
            .view()
            .insert_axis(ndarray::Axis(0))
            .broadcast(x.dim())
            .expect("broadcast mean");
        centered.dot(&self.matrix.t())
    }
}

/// Sample covariance of rows (denominator n-1), in f64.
pub fn covariance_f64(data: &Array2<f64>) -> Array2<f64> {
    let n = data.nrows();
    assert!(n >= 2, "covariance needs at least two rows");
    let d = data.ncols();
    let mean = data.mean_axis(ndarray::Axis(0)).expect("nonempty");
    let mut cov = Array2::zeros((d, d));
    for row in data.rows() {
        for i in 0..d {
            let ri = row[i] - mean[i];
            for j in i..d {
                cov[(i, j)] += ri * (row[j] - mean[j]);
            }
        }
    }
    let norm = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[(i, j)] /= norm;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    cov
}

/// Frobenius norm of the covariance entries that couple different modality
/// input blocks.
pub fn cross_block_covariance_norm(cov: &Array2<f64>, bundle: &BundleConfig) -> f64 {
    let d = cov.nrows();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            if bundle.is_cross_block(i, j) {
                acc += cov[(i, j)] * cov[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Fits a block-diagonal ZCA whitening transform on calibration rows: one
/// ZCA factor per modality block of the concatenated input.
///
/// Requires at least `2 * total_input_dim` rows. The last fifth of the rows
/// (at least two) is held out to measure `residual_delta`, the cross-block
/// covariance a block-respecting transform cannot remove. A rank-deficient
/// block covariance gets a ridge of `1e-6 * trace/dim` and sets the
/// `regularized` flag.
pub fn whiten_fit<T: Real>(
    calibration: &Array2<T>,
    bundle: &BundleConfig,
) -> Result<WhiteningTransform<T>> {
    let d = bundle.total_input_dim();
    if calibration.ncols() != d {
        return Err(GvfError::DimensionMismatch {
            context: "whitening calibration columns",
            expected: d,
            got: calibration.ncols(),
        });
    }
    let n = calibration.nrows();
    if n < 2 * d {
        return Err(GvfError::InvalidInput(format!(
            "whitening needs at least {} calibration rows, got {n}",
            2 * d
        )));
    }

    let data64 = calibration.mapv(|v| v.to_f64_lossy());
    let n_holdout = (n / 5).max(2);
    let n_fit = n - n_holdout;
    let fit = data64.slice(ndarray::s![..n_fit, ..]).to_owned();
    let holdout = data64.slice(ndarray::s![n_fit.., ..]).to_owned();

    let mean = fit.mean_axis(ndarray::Axis(0)).expect("nonempty fit split");
    let cov = covariance_f64(&fit);

    let mut w = Array2::<f64>::zeros((d, d));
    let mut any_regularized = false;
    for b in 0..bundle.modality_count() {
        let range = bundle.input_range(b);
        let db = range.len();
        let block = nalgebra::DMatrix::from_fn(db, db, |i, j| {
            cov[(range.start + i, range.start + j)]
        });
        let trace = block.trace();
        let eig = block.symmetric_eigen();
        let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let rank_deficient = eig
            .eigenvalues
            .iter()
            .any(|&l| l <= RANK_CUT * lambda_max.max(f64::MIN_POSITIVE));
        any_regularized |= rank_deficient;
        let ridge = if rank_deficient {
            1e-6 * trace / db as f64
        } else {
            0.0
        };
        // W_b = Q diag(1/sqrt(lambda + ridge)) Q^T
        for k in 0..db {
            let scale = 1.0 / (eig.eigenvalues[k].max(0.0) + ridge).sqrt();
            let q = eig.eigenvectors.column(k);
            for i in 0..db {
                for j in 0..db {
                    w[(range.start + i, range.start + j)] += scale * q[i] * q[j];
                }
            }
        }
    }

    // Residual cross-block covariance on the held-out split.
    let mut whitened = Array2::zeros((n_holdout, d));
    for (r, row) in holdout.rows().into_iter().enumerate() {
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += w[(i, j)] * (row[j] - mean[j]);
            }
            whitened[(r, i)] = acc;
        }
    }
    let residual = cross_block_covariance_norm(&covariance_f64(&whitened), bundle);

    Ok(WhiteningTransform {
        mean: mean.mapv(T::from_f64_lossy),
        matrix: w.mapv(T::from_f64_lossy),
        residual_delta: T::from_f64_lossy(residual),
        regularized: any_regularized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::bundle::ModalitySpec;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn two_block_bundle() -> BundleConfig {
        BundleConfig::new(vec![
            ModalitySpec {
                name: "a".into(),
                fiber_dim: 2,
                input_dim: 2,
            },
            ModalitySpec {
                name: "b".into(),
                fiber_dim: 2,
                input_dim: 2,
            },
        ])
        .unwrap()
    }

    fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.sample(StandardNormal))
    }

    #[test]
    fn white_data_gives_near_identity_and_small_residual() {
        let bundle = two_block_bundle();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = gaussian_rows(&mut rng, 60_000, 4);
        let t = whiten_fit(&data, &bundle).unwrap();
        assert!(!t.regularized);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((t.matrix[(i, j)] - expect).abs() < 0.05);
            }
        }
        assert!(t.residual_delta <= 0.05, "residual {}", t.residual_delta);
    }

    #[test]
    fn collinear_channels_are_decorrelated() {
        // Channel 1 duplicates channel 0 up to tiny noise, within block one
        // (the HR / HRV-clone situation).
        let bundle = two_block_bundle();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut data = gaussian_rows(&mut rng, 4000, 4);
        for r in 0..data.nrows() {
            let noise: f64 = rng.sample(StandardNormal);
            data[(r, 1)] = data[(r, 0)] + 1e-4 * noise;
        }
        let t = whiten_fit(&data, &bundle).unwrap();
        // Block covariance of the whitened fit split is the identity by
        // construction; the duplicated pair decorrelates.
        let whitened = t.apply(&data.slice(ndarray::s![..3200, ..]).to_owned());
        let cov = covariance_f64(&whitened);
        assert!(cov[(0, 1)].abs() < 1e-6, "residual correlation {}", cov[(0, 1)]);
        assert!((cov[(0, 0)] - 1.0).abs() < 1e-6);
        assert!((cov[(1, 1)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exactly_singular_covariance_regularizes() {
        let bundle = two_block_bundle();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut data = gaussian_rows(&mut rng, 64, 4);
        for r in 0..data.nrows() {
            data[(r, 3)] = data[(r, 2)]; // exact duplicate within block two
        }
        let t = whiten_fit(&data, &bundle).unwrap();
        assert!(t.regularized);
        assert!(t.matrix.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn residual_shrinks_with_more_samples() {
        let bundle = two_block_bundle();
        let mean_residual = |n: usize| {
            let mut acc = 0.0;
            for seed in 0..8u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
                let data = gaussian_rows(&mut rng, n, 4);
                acc += whiten_fit(&data, &bundle).unwrap().residual_delta;
            }
            acc / 8.0
        };
        assert!(mean_residual(16_000) <= mean_residual(1_000));
    }

    #[test]
    fn too_few_rows_rejected() {
        let bundle = two_block_bundle();
        let data = Array2::<f64>::zeros((7, 4));
        assert!(whiten_fit(&data, &bundle).is_err());
    }
}
