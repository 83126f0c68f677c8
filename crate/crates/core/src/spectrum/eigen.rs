use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::correlation::CorrelationMatrix;
use super::mp::mp_bounds;
use crate::error::{Error, Result};
use crate::scalar::{tol, Scalar};

/// Sorted eigen-decomposition of a correlation matrix with its MP edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T: Scalar> {
    /// Eigenvalues in descending order.
    pub eigenvalues: DVector<T>,
    /// Column `k` is the unit eigenvector of `eigenvalues[k]`, sign-fixed.
    pub eigenvectors: DMatrix<T>,
    pub mp_lower: T,
    pub mp_upper: T,
    pub ratio_c: T,
}

impl<T: Scalar> Spectrum<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(eigenvalues) V^T`.
    pub fn reconstruct(&self) -> DMatrix<T> {
        reconstruct(&self.eigenvectors, &self.eigenvalues)
    }
}

pub(crate) fn reconstruct<T: Scalar>(vectors: &DMatrix<T>, values: &DVector<T>) -> DMatrix<T> {
    let mut scaled = vectors.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col.scale_mut(values[k]);
    }
    let mut m = scaled * vectors.transpose();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = (m[(i, j)] + m[(j, i)]) * T::lit(0.5);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Flips `v` so that its entry sum is non-negative; when the sum is zero
/// within rounding, the largest-magnitude entry is made positive instead.
pub fn fix_sign<T: Scalar>(v: &mut DVector<T>) {
    let n = v.len();
    let sum = v.sum();
    let tie = tol::<T>(1e-12) * T::from_count(n).sqrt();
    let flip = if sum.abs() <= tie {
        let mut best = T::zero();
        for &x in v.iter() {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        best < T::zero()
    } else {
        sum < T::zero()
    };
    if flip {
        v.neg_mut();
    }
}

/// Symmetric eigen-decomposition of an arbitrary symmetric matrix, sorted
/// descending with [`fix_sign`] applied to every eigenvector.
pub fn sorted_eigen<T: Scalar>(m: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), T::machine_eps(), 1000 * n.max(1))
        .ok_or(Error::EigenNoConvergence)?;
    if eig.eigenvalues.iter().any(|x| !x.is_finite_value()) {
        return Err(Error::EigenNoConvergence);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v: DVector<T> = eig.eigenvectors.column(src).into_owned();
        fix_sign(&mut v);
        vectors.set_column(dst, &v);
    }
    Ok((values, vectors))
}

/// Full spectrum of `corr`, with MP bounds from `c = N / T` of its window.
pub fn eigendecompose<T: Scalar>(corr: &CorrelationMatrix<T>) -> Result<Spectrum<T>> {
    let (eigenvalues, eigenvectors) = sorted_eigen(&corr.values)?;
    let ratio_c = corr.ratio_c();
    let (mp_lower, mp_upper) = mp_bounds(ratio_c)?;
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        mp_lower,
        mp_upper,
        ratio_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn corr(values: DMatrix<f64>, t: usize) -> CorrelationMatrix<f64> {
        let n = values.nrows();
        CorrelationMatrix::from_values(
            (0..n).map(|i| i.to_string()).collect(),
            values,
            NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            DVector::from_element(n, 1.0),
            t,
        )
        .unwrap()
    }

    pub(crate) fn equicorrelation(n: usize, rho: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho })
    }

    fn check_invariants(s: &Spectrum<f64>, c: &DMatrix<f64>) {
        let n = s.dim();
        assert!((s.eigenvalues.sum() - n as f64).abs() < 1e-8);
        let gram = s.eigenvectors.tr_mul(&s.eigenvectors);
        assert!((gram - DMatrix::identity(n, n)).amax() < 1e-8);
        assert!((s.reconstruct() - c).amax() < 1e-8);
        for w in s.eigenvalues.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
        for v in s.eigenvectors.column_iter() {
            assert!(v.sum() >= -1e-12);
        }
    }

    #[test]
    fn identity_spectrum() {
        let c = DMatrix::identity(5, 5);
        let s = eigendecompose(&corr(c.clone(), 100)).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-14));
        check_invariants(&s, &c);
    }

    #[test]
    fn two_by_two() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]);
        let s = eigendecompose(&corr(c.clone(), 100)).unwrap();
        assert!((s.eigenvalues[0] - 1.6).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 0.4).abs() < 1e-14);
        // principal vector is (1, 1)/sqrt2 with positive sign
        assert!((s.eigenvectors[(0, 0)] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        // second vector sums to zero: the largest-magnitude entry is positive
        let v2 = s.eigenvectors.column(1);
        let big = if v2[0].abs() >= v2[1].abs() { v2[0] } else { v2[1] };
        assert!(big > 0.0);
        check_invariants(&s, &c);
    }

    #[test]
    fn equicorrelation_spectrum() {
        let c = equicorrelation(10, 0.3);
        let s = eigendecompose(&corr(c.clone(), 252)).unwrap();
        assert!((s.eigenvalues[0] - 3.7).abs() < 1e-12);
        assert!(s.eigenvalues.iter().skip(1).all(|&l| (l - 0.7).abs() < 1e-12));
        let u = 1.0 / 10f64.sqrt();
        assert!(s.eigenvectors.column(0).iter().all(|&x| (x - u).abs() < 1e-12));
        check_invariants(&s, &c);
        assert!((s.mp_upper - (1.0 + (10.0f64 / 252.0).sqrt()).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn sign_fix_rules() {
        let mut v = DVector::from_vec(vec![-0.5, -0.5, 0.1]);
        fix_sign(&mut v);
        assert_eq!(v.as_slice(), &[0.5, 0.5, -0.1]);
        let mut v = DVector::from_vec(vec![0.3, -0.7, 0.4]);
        fix_sign(&mut v);
        assert_eq!(v.as_slice(), &[-0.3, 0.7, -0.4]);
    }
}
