//! Phase-one search for a point of the simplex satisfying extra linear
//! inequalities, by the tableau simplex method with Bland's rule.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Finds `w >= 0`, `sum w = 1`, `rows * w <= rhs`, or reports infeasibility.
///
/// Minimizes the sum of artificial variables; a strictly positive optimum
/// means the constraint set is empty.
pub(crate) fn feasible_point<T: Scalar>(rows: &DMatrix<T>, rhs: &DVector<T>) -> Result<DVector<T>> {
    let n = rows.ncols();
    let m_ineq = rows.nrows();
    let m = m_ineq + 1;
    // columns: w (n), slacks (m_ineq), artificials (m), rhs
    let n_cols = n + m_ineq + m;
    let mut tab = DMatrix::<T>::zeros(m + 1, n_cols + 1);
    for j in 0..n {
        tab[(0, j)] = T::one();
    }
    tab[(0, n_cols)] = T::one();
    for i in 0..m_ineq {
        let sign = if rhs[i] < T::zero() { -T::one() } else { T::one() };
        for j in 0..n {
            tab[(i + 1, j)] = rows[(i, j)] * sign;
        }
        tab[(i + 1, n + i)] = sign;
        tab[(i + 1, n_cols)] = rhs[i] * sign;
    }
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        tab[(i, n + m_ineq + i)] = T::one();
        basis.push(n + m_ineq + i);
    }
    // reduced costs of the phase-one objective sit in the last row
    for j in 0..=n_cols {
        let is_artificial = j >= n + m_ineq && j < n_cols;
        if !is_artificial {
            let mut s = T::zero();
            for i in 0..m {
                s += tab[(i, j)];
            }
            tab[(m, j)] = -s;
        }
    }

    let scale = (0..m)
        .flat_map(|i| (0..=n_cols).map(move |j| (i, j)))
        .fold(T::one(), |acc, (i, j)| acc.max(tab[(i, j)].abs()));
    let tol = T::machine_eps().sqrt() * T::machine_eps().powf(T::lit(0.25)) * scale;
    let max_iter = 50 * (n_cols + m) + 100;
    for _ in 0..max_iter {
        let Some(enter) = (0..n_cols).find(|&j| tab[(m, j)] < -tol) else {
            let infeasibility = -tab[(m, n_cols)];
            if infeasibility > T::lit(1e-9).max(tol) {
                return Err(Error::Infeasible);
            }
            let mut w = DVector::zeros(n);
            for (i, &b) in basis.iter().enumerate() {
                if b < n {
                    w[b] = tab[(i, n_cols)].max(T::zero());
                }
            }
            let s = w.sum();
            if !(s > T::zero()) {
                return Err(Error::Infeasible);
            }
            return Ok(w / s);
        };
        let mut leave: Option<usize> = None;
        let mut best = T::zero();
        for i in 0..m {
            let a = tab[(i, enter)];
            if a > tol {
                let ratio = tab[(i, n_cols)] / a;
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best || (ratio == best && basis[i] < basis[l]),
                };
                if better {
                    leave = Some(i);
                    best = ratio;
                }
            }
        }
        // the phase-one objective is bounded below by zero
        let r = leave.ok_or(Error::Infeasible)?;
        pivot(&mut tab, r, enter);
        basis[r] = enter;
    }
    Err(Error::IterationLimit(max_iter))
}

fn pivot<T: Scalar>(tab: &mut DMatrix<T>, r: usize, c: usize) {
    let p = tab[(r, c)];
    tab.row_mut(r).unscale_mut(p);
    for i in 0..tab.nrows() {
        let f = tab[(i, c)];
        if i != r && f != T::zero() {
            for j in 0..tab.ncols() {
                let v = tab[(r, j)];
                tab[(i, j)] -= f * v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_returns_a_simplex_point() {
        let w: DVector<f64> = feasible_point::<f64>(&DMatrix::zeros(0, 3), &DVector::zeros(0)).unwrap();
        assert!((w.sum() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn respects_inequalities() {
        // w0 <= 0.1 and -w1 <= -0.5 (w1 >= 0.5)
        let rows = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, -1.0, 0.0]);
        let rhs = DVector::from_vec(vec![0.1, -0.5]);
        let w: DVector<f64> = feasible_point(&rows, &rhs).unwrap();
        assert!(w[0] <= 0.1 + 1e-12 && w[1] >= 0.5 - 1e-12);
        assert!((w.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        // sum w <= -1 cannot hold with w >= 0
        let rows = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let rhs = DVector::from_vec(vec![-1.0]);
        assert!(matches!(feasible_point(&rows, &rhs), Err(Error::Infeasible)));
        // w0 >= 0.7 and w1 >= 0.7
        let rows = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let rhs = DVector::from_vec(vec![-0.7, -0.7]);
        assert!(matches!(feasible_point(&rows, &rhs), Err(Error::Infeasible)));
    }
}
