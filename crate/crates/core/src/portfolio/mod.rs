//! Portfolio construction: equal weight, eigenportfolios, long-only minimum
//! variance and minimum variance with caps/floors on eigenmode exposure.

mod feasibility;
mod qp;

use std::fmt;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::market_data::ReturnPanel;
use crate::scalar::{tol, Scalar};

pub use qp::{kkt_residuals, solve_simplex_qp, Direction, KktResiduals, LinearConstraint, QpSolution};

/// Long-only, fully invested weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T: Scalar> {
    w: DVector<T>,
}

impl<T: Scalar> Weights<T> {
    /// Accepts `w` if every entry is `>= -1e-10` and the entries sum to one
    /// within `1e-8`.
    pub fn new(w: DVector<T>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::EmptyUniverse);
        }
        if w.iter().any(|x| !x.is_finite_value()) {
            return Err(invalid("weights must be finite"));
        }
        let floor = -tol::<T>(1e-10);
        if let Some((j, x)) = w.iter().enumerate().find(|(_, &x)| x < floor) {
            return Err(invalid(format!("weight {j} is negative ({})", x.as_f64())));
        }
        let s = w.sum();
        if (s - T::one()).abs() > tol::<T>(1e-8) {
            return Err(invalid(format!("weights sum to {}, not 1", s.as_f64())));
        }
        Ok(Self { w })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<T> {
        &self.w
    }

    pub fn as_slice(&self) -> &[T] {
        self.w.as_slice()
    }

    pub fn into_vector(self) -> DVector<T> {
        self.w
    }

    /// Variance `w' sigma w`.
    pub fn variance(&self, sigma: &DMatrix<T>) -> T {
        (self.w.transpose() * sigma * &self.w)[(0, 0)]
    }
}

pub fn equal_weight<T: Scalar>(n: usize) -> Result<Weights<T>> {
    if n == 0 {
        return Err(Error::EmptyUniverse);
    }
    Ok(Weights {
        w: DVector::from_element(n, T::one() / T::from_count(n)),
    })
}

/// Volatility-scaled eigenvector normalized to unit sum. May hold negative
/// entries, in which case it is not investable under the long-only rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenportfolio<T: Scalar> {
    pub w: DVector<T>,
    /// All normalized weights are `>= -1e-10`.
    pub investable: bool,
}

impl<T: Scalar> Eigenportfolio<T> {
    /// The weights as a simplex vector, when investable.
    pub fn weights(&self) -> Option<Weights<T>> {
        if !self.investable {
            return None;
        }
        let mut w = self.w.map(|x| x.max(T::zero()));
        let s = w.sum();
        w.unscale_mut(s);
        Weights::new(w).ok()
    }
}

/// `w_n = (v_n / sigma_n) / sum_m (v_m / sigma_m)`.
pub fn eigenportfolio<T: Scalar>(v: &DVector<T>, vols: &DVector<T>) -> Result<Eigenportfolio<T>> {
    if v.len() != vols.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            found: vols.len(),
        });
    }
    if v.is_empty() {
        return Err(Error::EmptyUniverse);
    }
    if let Some(s) = vols.iter().find(|&&s| !(s > T::zero()) || !s.is_finite_value()) {
        return Err(invalid(format!(
            "volatilities must be strictly positive, got {}",
            s.as_f64()
        )));
    }
    let raw = v.component_div(vols);
    let s = raw.sum();
    if s.abs() <= tol::<T>(1e-12) {
        return Err(Error::DegenerateEigenportfolio);
    }
    let w = raw / s;
    let floor = -tol::<T>(1e-10);
    let investable = w.iter().all(|&x| x >= floor);
    Ok(Eigenportfolio { w, investable })
}

/// Long-only minimum-variance weights.
pub fn min_variance<T: Scalar>(sigma: &DMatrix<T>) -> Result<Weights<T>> {
    Ok(solved_weights(solve_simplex_qp(sigma, &[])?))
}

fn solved_weights<T: Scalar>(sol: QpSolution<T>) -> Weights<T> {
    Weights::new(sol.w).expect("QP solutions lie on the simplex")
}

/// Ceiling on the exposure to the leading eigenvector and floor on the
/// exposure to the second one.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenmodeConstraints<T: Scalar> {
    pub gamma1_cap: T,
    pub gamma2_floor: T,
    pub v1: DVector<T>,
    pub v2: DVector<T>,
}

impl<T: Scalar> EigenmodeConstraints<T> {
    /// Checks that `v1` and `v2` are orthonormal within `1e-8`.
    pub fn new(v1: DVector<T>, v2: DVector<T>, gamma1_cap: T, gamma2_floor: T) -> Result<Self> {
        if v1.len() != v2.len() {
            return Err(Error::DimensionMismatch {
                expected: v1.len(),
                found: v2.len(),
            });
        }
        let t = tol::<T>(1e-8);
        if (v1.norm() - T::one()).abs() > t || (v2.norm() - T::one()).abs() > t {
            return Err(invalid("eigenmode vectors must have unit norm"));
        }
        if v1.dot(&v2).abs() > t {
            return Err(invalid("eigenmode vectors must be orthogonal"));
        }
        if !gamma1_cap.is_finite_value() || !gamma2_floor.is_finite_value() {
            return Err(invalid("eigenmode bounds must be finite"));
        }
        Ok(Self {
            gamma1_cap,
            gamma2_floor,
            v1,
            v2,
        })
    }

    fn cap(&self) -> LinearConstraint<T> {
        LinearConstraint::le(self.v1.clone(), self.gamma1_cap)
    }

    fn floor(&self) -> LinearConstraint<T> {
        LinearConstraint::ge(self.v2.clone(), self.gamma2_floor)
    }
}

/// Which eigenmode constraints had to be dropped to reach a feasible problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FallbackLevel {
    #[default]
    None,
    DroppedFloor,
    DroppedCapAndFloor,
}

impl FallbackLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            FallbackLevel::None => "none",
            FallbackLevel::DroppedFloor => "dropped_floor",
            FallbackLevel::DroppedCapAndFloor => "dropped_cap_and_floor",
        }
    }
}

impl fmt::Display for FallbackLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeAwareSolution<T: Scalar> {
    pub weights: Weights<T>,
    pub fallback: FallbackLevel,
    pub solution: QpSolution<T>,
}

/// Minimum variance subject to `w' v1 <= gamma1` and `w' v2 >= gamma2`.
///
/// If that is infeasible the floor is dropped first, then the cap, and the
/// level reached is reported.
pub fn regime_aware<T: Scalar>(
    sigma: &DMatrix<T>,
    constraints: &EigenmodeConstraints<T>,
) -> Result<RegimeAwareSolution<T>> {
    if constraints.v1.len() != sigma.nrows() {
        return Err(Error::DimensionMismatch {
            expected: sigma.nrows(),
            found: constraints.v1.len(),
        });
    }
    let ladder = [
        (FallbackLevel::None, vec![constraints.cap(), constraints.floor()]),
        (FallbackLevel::DroppedFloor, vec![constraints.cap()]),
        (FallbackLevel::DroppedCapAndFloor, vec![]),
    ];
    for (level, set) in ladder {
        match solve_simplex_qp(sigma, &set) {
            Ok(solution) => {
                if level != FallbackLevel::None {
                    warn!("eigenmode constraints infeasible, fell back to {level}");
                }
                return Ok(RegimeAwareSolution {
                    weights: Weights::new(solution.w.clone()).expect("QP solutions lie on the simplex"),
                    fallback: level,
                    solution,
                });
            }
            Err(Error::Infeasible) if level != FallbackLevel::DroppedCapAndFloor => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!("the last rung has no extra constraints")
}

/// Linear return `(exp(r_log) - 1)' w` of a portfolio over one period.
pub fn portfolio_return<T: Scalar>(w: &[T], r_log: &[T]) -> Result<T> {
    if w.len() != r_log.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: r_log.len(),
        });
    }
    Ok(w.iter()
        .zip(r_log)
        .fold(T::zero(), |acc, (&wi, &r)| acc + wi * (r.exp() - T::one())))
}

/// Linear return of holding `w` fixed over rows `start..start + len` of
/// `panel`: the daily portfolio returns compounded over the block.
pub fn block_return<T: Scalar>(w: &[T], panel: &ReturnPanel<T>, start: usize, len: usize) -> Result<T> {
    if start + len > panel.nrows() {
        return Err(Error::InsufficientData(format!(
            "return block {start}..{} exceeds the panel's {} rows",
            start + len,
            panel.nrows()
        )));
    }
    let mut growth = T::one();
    for row in panel.returns().rows(start, len).row_iter() {
        let r: Vec<T> = row.iter().copied().collect();
        growth *= T::one() + portfolio_return(w, &r)?;
    }
    Ok(growth - T::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(d))
    }

    fn assert_close(a: &DVector<f64>, b: &[f64], eps: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < eps, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn equal_weight_examples() {
        assert_eq!(equal_weight::<f64>(4).unwrap().as_slice(), &[0.25; 4]);
        assert_eq!(equal_weight::<f64>(1).unwrap().as_slice(), &[1.0]);
        let s: f64 = equal_weight::<f64>(30).unwrap().as_vector().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(equal_weight::<f64>(0).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(Weights::new(DVector::from_vec(vec![0.5, 0.5])).is_ok());
        assert!(Weights::new(DVector::from_vec(vec![1.1, -0.1])).is_err());
        assert!(Weights::new(DVector::from_vec(vec![0.5, 0.4])).is_err());
        assert!(Weights::new(DVector::from_vec(vec![1.0 + 1e-11, -1e-11])).is_ok());
    }

    #[test]
    fn eigenportfolio_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let e = eigenportfolio(&DVector::from_vec(vec![h, h]), &DVector::from_vec(vec![0.1, 0.2])).unwrap();
        assert!(e.investable);
        assert_close(&e.w, &[2.0 / 3.0, 1.0 / 3.0], 1e-14);

        let u = DVector::from_element(10, 1.0 / 10f64.sqrt());
        let e = eigenportfolio(&u, &DVector::from_element(10, 0.02)).unwrap();
        assert_close(&e.w, &[0.1; 10], 1e-14);

        let mixed: DVector<f64> = DVector::from_vec(vec![0.8, -0.2, 0.2, 0.5]).normalize();
        let e = eigenportfolio(&mixed, &DVector::from_element(4, 1.0)).unwrap();
        assert!(!e.investable);
        assert!(e.weights().is_none());
        assert!((e.w.sum() - 1.0).abs() < 1e-14);

        let balanced = DVector::from_vec(vec![0.5, -0.5, 0.5, -0.5]);
        assert!(matches!(
            eigenportfolio(&balanced, &DVector::from_element(4, 1.0)),
            Err(Error::DegenerateEigenportfolio)
        ));
        assert!(eigenportfolio(&u, &DVector::from_element(10, 0.0)).is_err());
    }

    #[test]
    fn min_variance_diagonal_cases() {
        let w = min_variance(&diag(&[1.0, 2.0, 4.0])).unwrap();
        assert_close(w.as_vector(), &[4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0], 1e-10);
        let w = min_variance(&DMatrix::<f64>::identity(5, 5)).unwrap();
        assert_close(w.as_vector(), &[0.2; 5], 1e-12);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]);
        assert_close(min_variance(&s).unwrap().as_vector(), &[0.5, 0.5], 1e-12);
        // weekly-scale variances do not disturb the solution
        let w = min_variance(&diag(&[1e-4, 4e-4])).unwrap();
        assert_close(w.as_vector(), &[0.8, 0.2], 1e-10);
    }

    #[test]
    fn min_variance_hits_the_bound() {
        // a highly volatile asset correlated with a calm one gets zero weight
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.9, 1.9, 4.0]);
        let sol = solve_simplex_qp(&s, &[]).unwrap();
        assert_close(&sol.w, &[1.0, 0.0], 1e-12);
        assert!(sol.bound_multipliers[1] > 0.0);
        assert!(sol.kkt.max() < 1e-7);
    }

    #[test]
    fn capped_identity() {
        let c = LinearConstraint::le(DVector::from_vec(vec![1.0, 0.0, 0.0]), 0.1);
        let sol = solve_simplex_qp(&DMatrix::<f64>::identity(3, 3), &[c]).unwrap();
        assert_close(&sol.w, &[0.1, 0.45, 0.45], 1e-10);
        assert!(sol.constraint_multipliers[0] > 0.0);
        assert!(sol.kkt.max() < 1e-7, "{:?}", sol.kkt);
    }

    #[test]
    fn rejects_bad_covariances() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(min_variance(&s), Err(Error::NotPsd { .. })));
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.1, 1.0]);
        assert!(min_variance(&s).is_err());
        let c = LinearConstraint::ge(DVector::from_vec(vec![1.0, 1.0]), 2.0);
        assert!(matches!(
            solve_simplex_qp(&DMatrix::<f64>::identity(2, 2), &[c]),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn singular_covariance_is_handled() {
        // rank one: every portfolio of two identical assets has unit variance
        let s: DMatrix<f64> = DMatrix::from_element(3, 3, 1.0);
        let sol = solve_simplex_qp(&s, &[]).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!((sol.w.sum() - 1.0).abs() < 1e-12);
    }

    fn equicorrelation(n: usize, rho: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho })
    }

    #[test]
    fn regime_aware_inactive_constraints() {
        let s = diag(&[1.0, 2.0, 4.0]);
        let mv = min_variance(&s).unwrap();
        let v1 = DVector::from_vec(vec![1.0, 1.0, 1.0]).normalize();
        let v2 = DVector::from_vec(vec![1.0, -1.0, 0.0]).normalize();
        // mv' v1 = 1/sqrt(3), mv' v2 = (2/7)/sqrt(2)
        let c = EigenmodeConstraints::new(v1, v2, 0.9, 0.0).unwrap();
        let ra = regime_aware(&s, &c).unwrap();
        assert_eq!(ra.fallback, FallbackLevel::None);
        assert!((ra.weights.as_vector() - mv.as_vector()).amax() < 1e-10);
    }

    #[test]
    fn uniform_leading_mode_makes_the_cap_infeasible() {
        // every simplex point has w' v1 = 1/sqrt(10) when v1 is uniform
        let n = 10;
        let s = equicorrelation(n, 0.9);
        let v1 = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let mut v2 = DVector::zeros(n);
        v2[0] = 1.0 / 2f64.sqrt();
        v2[1] = -1.0 / 2f64.sqrt();
        let c = EigenmodeConstraints::new(v1, v2, 0.3, 0.2).unwrap();
        let ra = regime_aware(&s, &c).unwrap();
        assert_eq!(ra.fallback, FallbackLevel::DroppedCapAndFloor);
        assert!((ra.weights.as_vector() - DVector::from_element(n, 0.1)).amax() < 1e-10);
    }

    #[test]
    fn binding_cap_on_tilted_leading_mode() {
        // v1 tilted toward the first assets so the cap can bind
        let n = 10;
        let s = equicorrelation(n, 0.9);
        let v1 = DVector::from_fn(n, |i, _| 1.0 + 0.5 * (n - i) as f64 / n as f64).normalize();
        let mv = min_variance(&s).unwrap();
        assert!(mv.as_vector().dot(&v1) > 0.3);
        // floor on a direction orthogonal to v1 that is satisfied anyway
        let mut v2 = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        v2 -= &v1 * v1.dot(&v2);
        let v2 = v2.normalize();
        let c = EigenmodeConstraints::new(v1.clone(), v2, 0.3, -1.0).unwrap();
        let ra = regime_aware(&s, &c).unwrap();
        assert_eq!(ra.fallback, FallbackLevel::None);
        assert!((ra.weights.as_vector().dot(&v1) - 0.3).abs() < 1e-6);
        assert!(ra.solution.kkt.max() < 1e-7);
    }

    #[test]
    fn negative_cap_falls_back() {
        let s = equicorrelation(4, 0.3);
        let v1 = DVector::from_element(4, 0.5);
        let v2 = DVector::from_vec(vec![0.5, 0.5, -0.5, -0.5]);
        let c = EigenmodeConstraints::new(v1, v2, -1.0, 0.2).unwrap();
        let ra = regime_aware(&s, &c).unwrap();
        assert_eq!(ra.fallback, FallbackLevel::DroppedCapAndFloor);
        // dropping only the floor is tried before the cap
        let c = EigenmodeConstraints::new(
            DVector::from_element(4, 0.5),
            DVector::from_vec(vec![0.5, 0.5, -0.5, -0.5]),
            0.6,
            0.9,
        )
        .unwrap();
        let ra = regime_aware(&s, &c).unwrap();
        assert_eq!(ra.fallback, FallbackLevel::DroppedFloor);
    }

    #[test]
    fn eigenmode_constraints_validation() {
        let a = DVector::from_vec(vec![1.0, 0.0]);
        let b = DVector::from_vec(vec![0.6, 0.8]);
        assert!(EigenmodeConstraints::new(a.clone(), b, 0.3, 0.2).is_err());
        assert!(EigenmodeConstraints::new(a.clone(), a * 2.0, 0.3, 0.2).is_err());
    }

    #[test]
    fn portfolio_return_examples() {
        assert_eq!(portfolio_return(&[0.5, 0.5], &[0.0, 0.0]).unwrap(), 0.0);
        let r: f64 = portfolio_return(&[1.0], &[1.1f64.ln()]).unwrap();
        assert!((r - 0.1).abs() < 1e-12);
        let r: f64 = portfolio_return(&[0.5, 0.5], &[1.1f64.ln(), 0.9f64.ln()]).unwrap();
        assert!(r.abs() < 1e-12);
        assert!(portfolio_return(&[1.0], &[0.0, 0.0]).is_err());
    }
}
