//! Dense primal active-set solver for `min w' S w` over the probability
//! simplex intersected with extra linear inequalities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::feasibility::feasible_point;
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::spectrum::sorted_eigen;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `a' w <= bound`
    Le,
    /// `a' w >= bound`
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint<T: Scalar> {
    pub a: DVector<T>,
    pub bound: T,
    pub direction: Direction,
}

impl<T: Scalar> LinearConstraint<T> {
    pub fn le(a: DVector<T>, bound: T) -> Self {
        Self {
            a,
            bound,
            direction: Direction::Le,
        }
    }

    pub fn ge(a: DVector<T>, bound: T) -> Self {
        Self {
            a,
            bound,
            direction: Direction::Ge,
        }
    }

    /// Amount by which `w` violates the constraint; zero when satisfied.
    pub fn violation(&self, w: &DVector<T>) -> T {
        let v = self.a.dot(w);
        match self.direction {
            Direction::Le => (v - self.bound).max(T::zero()),
            Direction::Ge => (self.bound - v).max(T::zero()),
        }
    }

    /// `(c, d)` with the constraint written as `c' w <= d`.
    fn as_le(&self) -> (DVector<T>, T) {
        match self.direction {
            Direction::Le => (self.a.clone(), self.bound),
            Direction::Ge => (-&self.a, -self.bound),
        }
    }
}

/// First-order optimality diagnostics of a returned point, all in the units
/// of the original problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals<T: Scalar> {
    /// Largest entry of the Lagrangian gradient.
    pub stationarity: T,
    /// Largest violation of a bound, the budget or an inequality.
    pub primal: T,
    /// Largest negative multiplier magnitude.
    pub dual: T,
    /// Largest `|multiplier * slack|`.
    pub complementarity: T,
}

impl<T: Scalar> KktResiduals<T> {
    pub fn max(&self) -> T {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T: Scalar> {
    pub w: DVector<T>,
    pub objective: T,
    /// Multiplier of the budget constraint `sum w = 1`.
    pub budget_multiplier: T,
    /// One non-negative multiplier per input inequality.
    pub constraint_multipliers: Vec<T>,
    /// Non-negative multipliers of the bounds `w >= 0`.
    pub bound_multipliers: DVector<T>,
    pub kkt: KktResiduals<T>,
    pub iterations: usize,
}

/// Inequality `c' w <= d` tracked by the active-set loop. Indices below `n`
/// are the bounds `-w_j <= 0`; the rest are the caller's constraints.
struct Ineq<T: Scalar> {
    c: Vec<DVector<T>>,
    d: Vec<T>,
}

impl<T: Scalar> Ineq<T> {
    fn slack(&self, i: usize, w: &DVector<T>) -> T {
        self.d[i] - self.c[i].dot(w)
    }
}

fn check_psd<T: Scalar>(sigma: &DMatrix<T>) -> Result<T> {
    let n = sigma.nrows();
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: sigma.ncols(),
        });
    }
    if sigma.iter().any(|x| !x.is_finite_value()) {
        return Err(invalid("covariance matrix has non-finite entries"));
    }
    let scale = sigma.amax();
    if !(scale > T::zero()) {
        return Err(Error::Degenerate("covariance matrix is zero".into()));
    }
    let sym_tol = T::lit(1e-10) * scale;
    for i in 0..n {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > sym_tol {
                return Err(invalid(format!("covariance matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    let (vals, _) = sorted_eigen(&(sigma / scale))?;
    let min = vals[n - 1];
    if min < -T::lit(1e-10).max(T::lit(64.0) * T::machine_eps()) {
        return Err(Error::NotPsd {
            min_eigenvalue: (min * scale).as_f64(),
        });
    }
    Ok(scale)
}

/// Minimizes `w' sigma w` subject to `w >= 0`, `sum w = 1` and `constraints`.
///
/// `sigma` must be symmetric positive semidefinite. A tiny ridge is added to
/// a singular matrix so the solution is unique. An empty feasible set yields
/// [`Error::Infeasible`].
pub fn solve_simplex_qp<T: Scalar>(
    sigma: &DMatrix<T>,
    constraints: &[LinearConstraint<T>],
) -> Result<QpSolution<T>> {
    let n = sigma.nrows();
    if n == 0 {
        return Err(Error::EmptyUniverse);
    }
    for c in constraints {
        if c.a.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.a.len(),
            });
        }
        if c.a.iter().any(|x| !x.is_finite_value()) || !c.bound.is_finite_value() {
            return Err(invalid("constraint has non-finite coefficients"));
        }
    }
    let scale = check_psd(sigma)?;

    // work on sigma / scale with a relative ridge; H = 2 S
    let mut h = (sigma + sigma.transpose()) / (scale * T::lit(2.0));
    let (vals, _) = sorted_eigen(&h)?;
    if vals[n - 1] < T::lit(1e-10) {
        for i in 0..n {
            h[(i, i)] += T::lit(1e-10);
        }
    }
    h *= T::lit(2.0);
    let h_max = h.amax();

    let mut ineq = Ineq {
        c: Vec::with_capacity(n + constraints.len()),
        d: Vec::with_capacity(n + constraints.len()),
    };
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = -T::one();
        ineq.c.push(e);
        ineq.d.push(T::zero());
    }
    for c in constraints {
        let (cv, d) = c.as_le();
        ineq.c.push(cv);
        ineq.d.push(d);
    }

    let mut w = if constraints.is_empty() {
        DVector::from_element(n, T::one() / T::from_count(n))
    } else {
        let rows = DMatrix::from_fn(constraints.len(), n, |i, j| ineq.c[n + i][j]);
        let rhs = DVector::from_iterator(constraints.len(), ineq.d[n..].iter().copied());
        feasible_point(&rows, &rhs)?
    };

    let step_tol = T::machine_eps().powf(T::lit(0.75));
    let mult_tol = T::machine_eps().sqrt() * T::lit(1e-3);
    let max_iter = 50 * (n + constraints.len()) + 100;
    let mut working: Vec<usize> = Vec::new();
    let mut y: DVector<T>;
    let mut iterations = 0;
    loop {
        if iterations >= max_iter {
            return Err(Error::IterationLimit(max_iter));
        }
        iterations += 1;
        let g = &h * &w;
        let (p, mult) = solve_kkt(&h, &g, &ineq, &working)?;
        let p_scale = T::one().max(w.amax());
        // a step whose predicted decrease is lost in rounding counts as zero;
        // this matters when the ridge leaves H badly conditioned. The floor
        // covers both the objective level and the error of g' p itself.
        let decrease = -(g.dot(&p) + p.dot(&(&h * &p)) * T::lit(0.5));
        let noise = w.dot(&g).abs() + T::from_count(n) * h_max * w.amax() * p.amax();
        let negligible = decrease <= T::lit(64.0) * T::machine_eps() * noise;
        if p.amax() <= step_tol * p_scale || negligible {
            y = mult;
            // multipliers of the working inequalities follow the budget's
            let (most_negative, value) = working
                .iter()
                .enumerate()
                .map(|(k, &i)| (k, i, y[k + 1]))
                .fold((None, T::zero()), |(best, bv), (k, i, v)| {
                    if v < bv {
                        (Some((k, i)), v)
                    } else {
                        (best, bv)
                    }
                });
            let g_scale = T::one().max(g.amax());
            match most_negative {
                Some((k, _)) if value < -mult_tol * g_scale => {
                    working.remove(k);
                }
                _ => break,
            }
            continue;
        }
        let mut alpha = T::one();
        let mut blocking = None;
        for i in 0..ineq.c.len() {
            if working.contains(&i) {
                continue;
            }
            let cp = ineq.c[i].dot(&p);
            if cp > step_tol * ineq.c[i].amax().max(T::one()) {
                let room = ineq.slack(i, &w).max(T::zero());
                let a = room / cp;
                if a < alpha {
                    alpha = a;
                    blocking = Some(i);
                }
            }
        }
        w.axpy(alpha, &p, T::one());
        if let Some(i) = blocking {
            working.push(i);
        }
    }

    // clean up rounding on the simplex
    w.iter_mut().for_each(|x| {
        if *x < T::zero() {
            *x = T::zero();
        }
    });
    let s = w.sum();
    w.unscale_mut(s);

    let budget_multiplier = y[0] * scale;
    let mut bound_multipliers = DVector::zeros(n);
    let mut constraint_multipliers = vec![T::zero(); constraints.len()];
    for (k, &i) in working.iter().enumerate() {
        let v = y[k + 1].max(T::zero()) * scale;
        if i < n {
            bound_multipliers[i] = v;
        } else {
            constraint_multipliers[i - n] = v;
        }
    }
    let objective = (w.transpose() * sigma * &w)[(0, 0)];
    let kkt = kkt_residuals(
        sigma,
        constraints,
        &w,
        budget_multiplier,
        &constraint_multipliers,
        &bound_multipliers,
    );
    Ok(QpSolution {
        w,
        objective,
        budget_multiplier,
        constraint_multipliers,
        bound_multipliers,
        kkt,
        iterations,
    })
}

/// Solves `[H A'; A 0] [p; y] = [-g; 0]` where `A` stacks the budget row and
/// the working inequalities.
fn solve_kkt<T: Scalar>(
    h: &DMatrix<T>,
    g: &DVector<T>,
    ineq: &Ineq<T>,
    working: &[usize],
) -> Result<(DVector<T>, DVector<T>)> {
    let n = h.nrows();
    let m = working.len() + 1;
    let dim = n + m;
    let mut k = DMatrix::zeros(dim, dim);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    for j in 0..n {
        k[(n, j)] = T::one();
        k[(j, n)] = T::one();
    }
    for (r, &i) in working.iter().enumerate() {
        for j in 0..n {
            k[(n + 1 + r, j)] = ineq.c[i][j];
            k[(j, n + 1 + r)] = ineq.c[i][j];
        }
    }
    let mut rhs = DVector::zeros(dim);
    for j in 0..n {
        rhs[j] = -g[j];
    }
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("singular KKT system in QP solver".into()))?;
    if sol.iter().any(|x| !x.is_finite_value()) {
        return Err(Error::Degenerate("singular KKT system in QP solver".into()));
    }
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}

/// Residuals of the Lagrangian conditions
/// `2 S w + mu 1 + sum_i l_i c_i - z = 0`, recomputed from scratch.
pub fn kkt_residuals<T: Scalar>(
    sigma: &DMatrix<T>,
    constraints: &[LinearConstraint<T>],
    w: &DVector<T>,
    budget_multiplier: T,
    constraint_multipliers: &[T],
    bound_multipliers: &DVector<T>,
) -> KktResiduals<T> {
    let mut grad = sigma * w * T::lit(2.0);
    grad.add_scalar_mut(budget_multiplier);
    grad -= bound_multipliers;
    let mut primal = (w.sum() - T::one()).abs();
    let mut dual = T::zero();
    let mut complementarity = T::zero();
    for j in 0..w.len() {
        primal = primal.max(-w[j]);
        dual = dual.max(-bound_multipliers[j]);
        complementarity = complementarity.max((bound_multipliers[j] * w[j]).abs());
    }
    for (c, &l) in constraints.iter().zip(constraint_multipliers) {
        let (cv, d) = c.as_le();
        grad.axpy(l, &cv, T::one());
        let slack = d - cv.dot(w);
        primal = primal.max(-slack);
        dual = dual.max(-l);
        complementarity = complementarity.max((l * slack).abs());
    }
    KktResiduals {
        stationarity: grad.amax(),
        primal,
        dual,
        complementarity,
    }
}
