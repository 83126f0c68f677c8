//! Small descriptive-statistics helpers over slices.

use crate::scalar::Scalar;

pub fn mean<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    xs.iter().fold(T::zero(), |acc, &x| acc + x) / T::from_count(xs.len())
}

/// Sample variance with the `n - 1` denominator.
pub fn sample_variance<T: Scalar>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::nan();
    }
    let m = mean(xs);
    let ss = xs.iter().fold(T::zero(), |acc, &x| acc + (x - m) * (x - m));
    ss / T::from_count(xs.len() - 1)
}

pub fn sample_std<T: Scalar>(xs: &[T]) -> T {
    sample_variance(xs).sqrt()
}

/// Sample covariance with the `n - 1` denominator.
pub fn sample_covariance<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return T::nan();
    }
    let (mx, my) = (mean(xs), mean(ys));
    let s = xs
        .iter()
        .zip(ys)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - mx) * (y - my));
    s / T::from_count(xs.len() - 1)
}

/// Pearson correlation; NaN when either input is constant.
pub fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return T::nan();
    }
    sxy / (sxx * syy).sqrt()
}
