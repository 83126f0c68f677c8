//! Eigenvalue clipping, correlation-to-covariance mapping and linear
//! shrinkage toward a structured target.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::spectrum::{eigendecompose, reconstruct, CorrelationMatrix, Spectrum};

/// Spectrum after replacing the noise bulk by its average.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedEigenvalues<T: Scalar> {
    pub values: DVector<T>,
    /// Number of eigenvalues strictly above the threshold, kept as is.
    pub k_star: usize,
}

/// Keeps eigenvalues strictly above `mp_upper` and replaces the rest by
/// their mean, which preserves the trace. `eigenvalues` must be sorted
/// descending. With no outlier every value becomes the overall mean; with no
/// bulk the input is returned unchanged.
pub fn clip_values<T: Scalar>(eigenvalues: &DVector<T>, mp_upper: T) -> ClippedEigenvalues<T> {
    let n = eigenvalues.len();
    let k_star = eigenvalues.iter().take_while(|&&l| l > mp_upper).count();
    let mut values = eigenvalues.clone();
    if k_star < n {
        let tail = eigenvalues.rows(k_star, n - k_star);
        let avg = tail.sum() / T::from_count(n - k_star);
        values.rows_mut(k_star, n - k_star).fill(avg);
    }
    ClippedEigenvalues { values, k_star }
}

pub fn clip_eigenvalues<T: Scalar>(spectrum: &Spectrum<T>) -> ClippedEigenvalues<T> {
    clip_values(&spectrum.eigenvalues, spectrum.mp_upper)
}

/// Denoised correlation matrix with unit diagonal restored.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanedCorrelation<T: Scalar> {
    pub values: DMatrix<T>,
    pub k_star: usize,
    pub mp_upper: T,
}

/// `C_den = S^-1/2 V diag(clipped) V^T S^-1/2` with `S = diag(V diag(clipped) V^T)`.
pub fn denoise_correlation<T: Scalar>(corr: &CorrelationMatrix<T>) -> Result<CleanedCorrelation<T>> {
    let spectrum = eigendecompose(corr)?;
    denoise_with_spectrum(&spectrum)
}

/// Same as [`denoise_correlation`] for an already decomposed matrix.
pub fn denoise_with_spectrum<T: Scalar>(spectrum: &Spectrum<T>) -> Result<CleanedCorrelation<T>> {
    let clipped = clip_eigenvalues(spectrum);
    let mut c = reconstruct(&spectrum.eigenvectors, &clipped.values);
    let n = c.nrows();
    let inv_sqrt: Vec<T> = (0..n)
        .map(|i| {
            let d = c[(i, i)];
            if d > T::zero() {
                Ok(T::one() / d.sqrt())
            } else {
                Err(Error::Degenerate(format!(
                    "cleaned correlation has non-positive diagonal entry {} at {i}",
                    d.as_f64()
                )))
            }
        })
        .collect::<Result<_>>()?;
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
        c[(i, i)] = T::one();
    }
    Ok(CleanedCorrelation {
        values: c,
        k_star: clipped.k_star,
        mp_upper: spectrum.mp_upper,
    })
}

/// `D C D` with `D = diag(vols)`.
pub fn corr_to_cov<T: Scalar>(corr_values: &DMatrix<T>, vols: &DVector<T>) -> Result<DMatrix<T>> {
    let n = corr_values.nrows();
    if corr_values.ncols() != n || vols.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: vols.len(),
        });
    }
    if let Some(v) = vols.iter().find(|&&v| !(v > T::zero()) || !v.is_finite_value()) {
        return Err(invalid(format!(
            "volatilities must be strictly positive, got {}",
            v.as_f64()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| (vols[i] * vols[j]) * corr_values[(i, j)]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkageTarget {
    /// Average variance on the diagonal, average covariance off it.
    #[default]
    CompoundSymmetry,
    /// Average variance times the identity.
    Identity,
}

/// Covariance after linear shrinkage.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrunkCovariance<T: Scalar> {
    pub values: DMatrix<T>,
    pub delta: T,
    pub target_kind: ShrinkageTarget,
}

/// The shrinkage target built from `sigma`.
pub fn shrinkage_target<T: Scalar>(sigma: &DMatrix<T>, kind: ShrinkageTarget) -> DMatrix<T> {
    let n = sigma.nrows();
    let avg_var = sigma.diagonal().sum() / T::from_count(n.max(1));
    let avg_cov = match kind {
        ShrinkageTarget::Identity => T::zero(),
        ShrinkageTarget::CompoundSymmetry if n > 1 => {
            let mut s = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    s += sigma[(i, j)];
                }
            }
            s / T::from_count(n * (n - 1) / 2)
        }
        ShrinkageTarget::CompoundSymmetry => T::zero(),
    };
    DMatrix::from_fn(n, n, |i, j| if i == j { avg_var } else { avg_cov })
}

/// `(1 - delta) sigma + delta T` with the compound-symmetry target.
pub fn shrink_covariance<T: Scalar>(sigma: &DMatrix<T>, delta: T) -> Result<ShrunkCovariance<T>> {
    shrink_covariance_toward(sigma, delta, ShrinkageTarget::CompoundSymmetry)
}

pub fn shrink_covariance_toward<T: Scalar>(
    sigma: &DMatrix<T>,
    delta: T,
    kind: ShrinkageTarget,
) -> Result<ShrunkCovariance<T>> {
    if !(delta >= T::zero() && delta <= T::one()) {
        return Err(invalid(format!(
            "shrinkage intensity must lie in [0, 1], got {}",
            delta.as_f64()
        )));
    }
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            expected: sigma.nrows(),
            found: sigma.ncols(),
        });
    }
    let target = shrinkage_target(sigma, kind);
    let values = sigma * (T::one() - delta) + target * delta;
    Ok(ShrunkCovariance {
        values,
        delta,
        target_kind: kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{correlation, sorted_eigen};
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()
    }

    fn corr_from(values: DMatrix<f64>, t: usize) -> CorrelationMatrix<f64> {
        let n = values.nrows();
        CorrelationMatrix::from_values(
            (0..n).map(|i| i.to_string()).collect(),
            values,
            day(),
            DVector::from_element(n, 1.0),
            t,
        )
        .unwrap()
    }

    fn wishart_corr(n: usize, t: usize, seed: u64) -> CorrelationMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(t, n, |_, _| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let names: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        correlation(&x, &names, day()).unwrap()
    }

    fn min_eig(m: &DMatrix<f64>) -> f64 {
        let (vals, _) = sorted_eigen(m).unwrap();
        vals[vals.len() - 1]
    }

    #[test]
    fn clipping_examples() {
        let e: DVector<f64> = DVector::from_vec(vec![3.0, 0.9, 0.6, 0.5]);
        let c = clip_values(&e, 1.8);
        assert_eq!(c.k_star, 1);
        assert_eq!(c.values[0], 3.0);
        // average of the clipped tail (0.9 + 0.6 + 0.5) / 3
        for k in 1..4 {
            assert!((c.values[k] - 2.0 / 3.0).abs() < 1e-15);
        }
        assert!((c.values.sum() - e.sum()).abs() < 1e-12);

        let e = DVector::from_vec(vec![5.0, 4.0, 3.0]);
        let c = clip_values(&e, 1.8);
        assert_eq!(c.k_star, 3);
        assert_eq!(c.values, e);

        let e = DVector::from_element(6, 1.0);
        let c = clip_values(&e, 1.8);
        assert_eq!(c.k_star, 0);
        assert_eq!(c.values, e);
    }

    #[test]
    fn threshold_equality_clips() {
        let e = DVector::from_vec(vec![1.8, 0.2]);
        assert_eq!(clip_values(&e, 1.8).k_star, 0);
    }

    #[test]
    fn denoise_identity_and_equicorrelation() {
        let id = DMatrix::identity(7, 7);
        let d = denoise_correlation(&corr_from(id.clone(), 100)).unwrap();
        assert!((d.values - id).amax() < 1e-12);

        let n = 10;
        let eq = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.5 });
        let d = denoise_correlation(&corr_from(eq, 252)).unwrap();
        assert_eq!(d.k_star, 1);
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { 1.0 } else { 0.5 };
                assert!((d.values[(i, j)] - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn denoised_wishart_is_a_correlation_matrix() {
        let c = wishart_corr(20, 60, 5);
        let d = denoise_correlation(&c).unwrap();
        let n = 20;
        assert!((d.values.trace() - n as f64).abs() < 1e-8);
        for i in 0..n {
            assert!((d.values[(i, i)] - 1.0).abs() < 1e-10);
            for j in 0..n {
                assert_eq!(d.values[(i, j)], d.values[(j, i)]);
            }
        }
        assert!(min_eig(&d.values) >= -1e-10);
    }

    #[test]
    fn denoise_keeps_leading_mode_order() {
        let c = wishart_corr(15, 200, 9);
        let mut planted = c.values.clone();
        // add a strong market mode so that k* >= 1
        for i in 0..15 {
            for j in 0..15 {
                if i != j {
                    planted[(i, j)] = 0.6 + 0.4 * planted[(i, j)];
                }
            }
        }
        let corr = corr_from(planted, 200);
        let raw = eigendecompose(&corr).unwrap();
        let d = denoise_correlation(&corr).unwrap();
        assert!(d.k_star >= 1);
        let (_, vecs) = sorted_eigen(&d.values).unwrap();
        let overlap = vecs.column(0).dot(&raw.eigenvectors.column(0));
        assert!(overlap > 0.999, "{overlap}");
    }

    #[test]
    fn idempotent_without_outliers() {
        // k* = 0 maps to the identity, which is a fixed point
        let c = wishart_corr(10, 500, 2);
        let d1 = denoise_correlation(&c).unwrap();
        assert_eq!(d1.k_star, 0);
        let c2 = corr_from(d1.values.clone(), 500);
        let d2 = denoise_correlation(&c2).unwrap();
        assert_eq!(d2.k_star, 0);
        assert!((d2.values - d1.values).amax() < 1e-8);
    }

    #[test]
    fn corr_to_cov_examples() {
        let c = DMatrix::identity(2, 2);
        let s = corr_to_cov(&c, &DVector::from_vec(vec![2.0, 3.0])).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]));

        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        assert_eq!(corr_to_cov(&c, &DVector::from_element(2, 1.0)).unwrap(), c);

        let c: DMatrix<f64> = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let s = corr_to_cov(&c, &DVector::from_vec(vec![0.1, 0.2])).unwrap();
        assert!((s[(0, 1)] - 0.01).abs() < 1e-15);

        assert!(corr_to_cov(&c, &DVector::from_vec(vec![0.1, 0.0])).is_err());
        assert!(corr_to_cov(&c, &DVector::from_vec(vec![0.1])).is_err());
    }

    #[test]
    fn corr_to_cov_round_trip() {
        let c = wishart_corr(8, 40, 3);
        let vols = DVector::from_fn(8, |i, _| 0.01 + 0.003 * i as f64);
        let s = corr_to_cov(&c.values, &vols).unwrap();
        let back = DMatrix::from_fn(8, 8, |i, j| s[(i, j)] / (vols[i] * vols[j]));
        assert!((back - &c.values).amax() < 1e-12);
    }

    #[test]
    fn shrinkage_examples() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]);
        assert_eq!(shrink_covariance(&s, 0.0).unwrap().values, s);

        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let full = shrink_covariance(&s, 1.0).unwrap();
        assert_eq!(full.values, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));
        assert_eq!(full.target_kind, ShrinkageTarget::CompoundSymmetry);

        assert!(shrink_covariance(&s, -0.1).is_err());
        assert!(shrink_covariance(&s, 1.1).is_err());
        assert!(shrink_covariance(&s, f64::NAN).is_err());
    }

    #[test]
    fn compound_symmetry_target_averages() {
        let s: DMatrix<f64> = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.2, 0.1, 2.0, 0.3, 0.2, 0.3, 3.0]);
        let t = shrinkage_target(&s, ShrinkageTarget::CompoundSymmetry);
        assert!((t[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((t[(1, 2)] - 0.2).abs() < 1e-15);
        let t = shrinkage_target(&s, ShrinkageTarget::Identity);
        assert_eq!(t[(0, 1)], 0.0);
    }

    #[test]
    fn shrunk_random_psd_stays_psd() {
        let c = wishart_corr(12, 30, 4);
        let vols = DVector::from_fn(12, |i, _| 0.5 + 0.1 * i as f64);
        let s = corr_to_cov(&c.values, &vols).unwrap();
        let shrunk = shrink_covariance(&s, 0.1).unwrap();
        assert!(min_eig(&shrunk.values) >= -1e-10);
        assert_eq!(shrunk.values, shrunk.values.transpose());
    }
}
