//! Fréchet distance between Gaussian fits of two feature distributions.
//!
//! The cross term `Tr((Σr Σs)^{1/2})` is evaluated as
//! `Tr((Σs^{1/2} Σr Σs^{1/2})^{1/2})`, which has the same eigenvalues but is
//! symmetric positive semi-definite, so a real symmetric eigensolver suffices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::features::FeatureSet;

const SYMMETRY_TOL: f64 = 1e-8;
/// Eigenvalues below this fraction of the largest are treated as zero.
const CLAMP_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianStats {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: covariance.nrows(),
            });
        }
        check_symmetric(&covariance)?;
        Ok(Self { mean, covariance })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let asym = (a - a.transpose()).amax();
    if !(asym <= SYMMETRY_TOL) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Sample mean and unbiased (N−1) covariance.
pub fn gaussian_stats(fs: &FeatureSet) -> Result<GaussianStats> {
    let n = fs.rows();
    if n < 2 {
        return Err(Error::CovarianceUndefined { rows: n });
    }
    let d = fs.dim();
    let mut mean = DVector::<f64>::zeros(d);
    for row in fs.iter_rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += f64::from(v);
        }
    }
    mean /= n as f64;

    let mut centred = DMatrix::<f64>::zeros(n, d);
    for (i, row) in fs.iter_rows().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            centred[(i, j)] = f64::from(v) - mean[j];
        }
    }
    let mut cov = centred.tr_mul(&centred) / (n as f64 - 1.0);
    // Mirror the upper triangle so the matrix is exactly symmetric.
    for i in 0..d {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    Ok(GaussianStats {
        mean,
        covariance: cov,
    })
}

fn psd_eigen(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNonConvergence);
    }
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or(Error::EigenNonConvergence)?;
    let max = eig.eigenvalues.max().max(0.0);
    let floor = CLAMP_REL * max;
    let lambda = eig
        .eigenvalues
        .map(|l| if l > floor { l } else { 0.0 });
    Ok((lambda, eig.eigenvectors))
}

/// Principal square root of a symmetric PSD matrix, `V·diag(√λ⁺)·Vᵀ`.
pub fn matrix_sqrt_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(a)?;
    let (lambda, v) = psd_eigen(a)?;
    let scaled = &v * DMatrix::from_diagonal(&lambda.map(f64::sqrt));
    let mut s = scaled * v.transpose();
    symmetrize(&mut s);
    Ok(s)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `‖μr − μs‖² + Tr(Σr + Σs − 2(ΣrΣs)^{1/2})`, clamped at zero.
pub fn fid(real: &GaussianStats, synth: &GaussianStats) -> Result<f64> {
    if real.dim() != synth.dim() {
        return Err(Error::DimensionMismatch {
            expected: real.dim(),
            found: synth.dim(),
        });
    }
    let mean_term = (&real.mean - &synth.mean).norm_squared();
    let root_s = matrix_sqrt_psd(&synth.covariance)?;
    let mut sandwich = &root_s * &real.covariance * &root_s;
    symmetrize(&mut sandwich);
    let (lambda, _) = psd_eigen(&sandwich)?;
    let cross: f64 = lambda.iter().map(|l| l.sqrt()).sum();
    let value = mean_term + real.covariance.trace() + synth.covariance.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}

/// Convenience: FID between two feature sets.
pub fn fid_from_features(real: &FeatureSet, synth: &FeatureSet) -> Result<f64> {
    fid(&gaussian_stats(real)?, &gaussian_stats(synth)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSource;
    use approx::assert_relative_eq;

    fn stats1(mu: f64, var: f64) -> GaussianStats {
        GaussianStats::new(DVector::from_element(1, mu), DMatrix::from_element(1, 1, var)).unwrap()
    }

    #[test]
    fn stats_hand_computed() {
        let fs = FeatureSet::from_rows(&[[0.0, 0.0], [2.0, 0.0]], FeatureSource::Inception).unwrap();
        let s = gaussian_stats(&fs).unwrap();
        assert_eq!(s.mean().as_slice(), &[1.0, 0.0]);
        assert_eq!(s.covariance(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn stats_identical_rows_zero_cov_and_single_row_error() {
        let fs = FeatureSet::from_rows(&[[0.3, 1.0]; 4], FeatureSource::Inception).unwrap();
        assert_eq!(gaussian_stats(&fs).unwrap().covariance().amax(), 0.0);
        let one = FeatureSet::from_rows(&[[0.3, 1.0]], FeatureSource::Inception).unwrap();
        assert!(matches!(gaussian_stats(&one), Err(Error::CovarianceUndefined { rows: 1 })));
    }

    #[test]
    fn sqrt_fixed_points() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_relative_eq!(matrix_sqrt_psd(&id).unwrap(), id, epsilon = 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert_relative_eq!(matrix_sqrt_psd(&d).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn sqrt_reconstructs() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let s = matrix_sqrt_psd(&a).unwrap();
        assert!((&s * &s - &a).amax() < 1e-10);
    }

    #[test]
    fn sqrt_rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(matrix_sqrt_psd(&a), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn one_dimensional_closed_forms() {
        assert!(fid(&stats1(0.0, 1.0), &stats1(0.0, 1.0)).unwrap() <= 1e-6);
        assert_relative_eq!(fid(&stats1(0.0, 1.0), &stats1(1.0, 1.0)).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(fid(&stats1(0.0, 1.0), &stats1(0.0, 4.0)).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let two = GaussianStats::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(fid(&stats1(0.0, 1.0), &two), Err(Error::DimensionMismatch { .. })));
    }
}
