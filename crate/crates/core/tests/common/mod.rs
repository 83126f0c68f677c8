#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use specreg::portfolio::{Direction, LinearConstraint};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random covariance `B' B / k` with `k` factor rows; singular when `k < n`.
pub fn random_psd(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = gaussian_matrix(k, n, rng);
    let s = b.transpose() * b / k as f64;
    (&s + s.transpose()) * 0.5
}

pub fn equicorrelation(n: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho })
}

pub fn random_constraint(n: usize, rng: &mut ChaCha8Rng) -> LinearConstraint<f64> {
    let a = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let bound = rng.random_range(-0.3..0.6);
    if rng.random_bool(0.5) {
        LinearConstraint::le(a, bound)
    } else {
        LinearConstraint::ge(a, bound)
    }
}

/// Exact minimum of `w' S w` over the grid `{k / res}` on the simplex,
/// restricted to points satisfying `constraints`. Supports `n <= 4`.
///
/// The first `n - 2` coordinates are enumerated; along the remaining edge the
/// objective is a convex quadratic in one integer variable, whose feasible
/// interval comes from the linear constraints, so only the interval ends and
/// the two integers around the vertex need evaluating.
pub fn grid_minimum(
    sigma: &DMatrix<f64>,
    constraints: &[LinearConstraint<f64>],
    res: usize,
) -> Option<(f64, DVector<f64>)> {
    let n = sigma.nrows();
    assert!((1..=4).contains(&n));
    let h = 1.0 / res as f64;
    let s = |i: usize, j: usize| sigma[(i, j)];
    let dot = |a: &DVector<f64>, w: &[f64; 4]| (0..n).map(|j| a[j] * w[j]).sum::<f64>();
    let feasible = |w: &[f64; 4]| {
        constraints.iter().all(|c| {
            let v = dot(&c.a, w);
            match c.direction {
                Direction::Le => v <= c.bound + 1e-12,
                Direction::Ge => v >= c.bound - 1e-12,
            }
        })
    };
    let objective = |w: &[f64; 4]| {
        let mut f = 0.0;
        for i in 0..n {
            for j in 0..n {
                f += w[i] * s(i, j) * w[j];
            }
        }
        f
    };
    let to_vec = |w: &[f64; 4]| DVector::from_fn(n, |i, _| w[i]);
    if n == 1 {
        let w = [1.0, 0.0, 0.0, 0.0];
        return feasible(&w).then(|| (objective(&w), to_vec(&w)));
    }
    let (p, q) = (n - 2, n - 1);
    // along the edge: f(x) = f(w0) + f1 x + f2 x^2 with d = h (e_p - e_q)
    let f2 = (s(p, p) - 2.0 * s(p, q) + s(q, q)) * h * h;
    let mut best: Option<(f64, [f64; 4])> = None;
    let mut prefix = [0usize; 2];
    loop {
        let used: usize = prefix[..p].iter().sum();
        if used <= res {
            let rem = res - used;
            let mut w0 = [0.0f64; 4];
            for j in 0..p {
                w0[j] = prefix[j] as f64 * h;
            }
            w0[q] = rem as f64 * h;
            let mut lo = 0.0f64;
            let mut hi = rem as f64;
            let mut ok = true;
            for c in constraints {
                let base = dot(&c.a, &w0);
                let slope = (c.a[p] - c.a[q]) * h;
                // base + slope x (<= or >=) bound
                let (sl, b) = match c.direction {
                    Direction::Le => (slope, c.bound - base),
                    Direction::Ge => (-slope, base - c.bound),
                };
                let b = b + 1e-12;
                if sl.abs() < 1e-15 {
                    if b < 0.0 {
                        ok = false;
                    }
                } else if sl > 0.0 {
                    hi = hi.min((b / sl).floor());
                } else {
                    lo = lo.max((b / sl).ceil());
                }
            }
            if ok && lo <= hi {
                let mut f1 = 0.0;
                for j in 0..n {
                    f1 += 2.0 * h * (s(p, j) - s(q, j)) * w0[j];
                }
                let mut cands = [lo, hi, lo, hi];
                if f2 > 0.0 {
                    let x = (-f1 / (2.0 * f2)).clamp(lo, hi);
                    cands[2] = x.floor().clamp(lo, hi);
                    cands[3] = x.ceil().clamp(lo, hi);
                }
                for x in cands {
                    let xi = x as usize;
                    let mut cand = w0;
                    cand[p] = xi as f64 * h;
                    cand[q] = (rem - xi) as f64 * h;
                    if !feasible(&cand) {
                        continue;
                    }
                    let f = objective(&cand);
                    if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                        best = Some((f, cand));
                    }
                }
            }
        }
        // odometer over the prefix
        let mut k = 0;
        loop {
            if k == p {
                return best.map(|(f, w)| (f, to_vec(&w)));
            }
            prefix[k] += 1;
            if prefix[..p].iter().sum::<usize>() <= res {
                break;
            }
            prefix[k] = 0;
            k += 1;
        }
    }
}
