use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::scalar::{tol, Scalar};

/// Pearson correlation matrix of one window together with the per-asset
/// sample volatilities needed to map it back to a covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix<T: Scalar> {
    pub tickers: Vec<String>,
    pub values: DMatrix<T>,
    pub asof_date: NaiveDate,
    pub window_vols: DVector<T>,
    /// Number of observations the matrix was estimated from.
    pub sample_len: usize,
}

impl<T: Scalar> CorrelationMatrix<T> {
    /// Wraps an externally built correlation matrix after checking symmetry,
    /// unit diagonal and entry range.
    pub fn from_values(
        tickers: Vec<String>,
        values: DMatrix<T>,
        asof_date: NaiveDate,
        window_vols: DVector<T>,
        sample_len: usize,
    ) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: values.ncols(),
            });
        }
        for len in [tickers.len(), window_vols.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        let eps = tol::<T>(1e-12);
        for i in 0..n {
            if (values[(i, i)] - T::one()).abs() > eps {
                return Err(invalid(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                if (values[(i, j)] - values[(j, i)]).abs() > eps {
                    return Err(invalid(format!("matrix not symmetric at ({i}, {j})")));
                }
                if values[(i, j)].abs() > T::one() + eps {
                    return Err(invalid(format!("entry ({i}, {j}) outside [-1, 1]")));
                }
            }
        }
        Ok(Self {
            tickers,
            values,
            asof_date,
            window_vols,
            sample_len,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Aspect ratio `N / T` of the estimating window.
    pub fn ratio_c(&self) -> T {
        T::from_count(self.dim()) / T::from_count(self.sample_len)
    }
}

/// Pearson correlation `Z^T Z / (T - 1)` of a `T x N` block of returns, with
/// `Z` the column-wise z-scored block (sample std, `T - 1` denominator).
pub fn correlation<T: Scalar>(
    returns: &DMatrix<T>,
    tickers: &[String],
    asof_date: NaiveDate,
) -> Result<CorrelationMatrix<T>> {
    let (t_len, n) = returns.shape();
    if tickers.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: tickers.len(),
        });
    }
    if t_len < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 2 observations, got {t_len}"
        )));
    }
    let denom = T::from_count(t_len - 1);
    let mut z = returns.clone();
    let mut vols = DVector::zeros(n);
    for j in 0..n {
        let mut col = z.column_mut(j);
        let scale = col.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        let mean = col.sum() / T::from_count(t_len);
        col.add_scalar_mut(-mean);
        let std = (col.norm_squared() / denom).sqrt();
        if std <= T::lit(16.0) * T::machine_eps() * scale || std == T::zero() {
            return Err(Error::ZeroVariance(tickers[j].clone()));
        }
        col.unscale_mut(std);
        vols[j] = std;
    }
    let mut values = z.tr_mul(&z) / denom;
    for i in 0..n {
        values[(i, i)] = T::one();
        for j in 0..i {
            let v = ((values[(i, j)] + values[(j, i)]) * T::lit(0.5)).clamp(-T::one(), T::one());
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(CorrelationMatrix {
        tickers: tickers.to_vec(),
        values,
        asof_date,
        window_vols: vols,
        sample_len: t_len,
    })
}
