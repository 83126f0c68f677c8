//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! The pipeline needs square roots, logarithms, exponentials and a symmetric
//! eigen-solver, so the scalar must be a real field. `f64` is the production
//! type; `f32` is supported for memory-constrained sweeps.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable across the whole pipeline.
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion from a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the concrete type.
    fn machine_eps() -> Self;

    fn nan() -> Self;

    fn infinity() -> Self;

    fn is_finite_value(self) -> bool;

    fn is_nan_value(self) -> bool {
        self != self
    }
}

impl Scalar for f64 {
    fn machine_eps() -> Self {
        f64::EPSILON
    }
    fn nan() -> Self {
        f64::NAN
    }
    fn infinity() -> Self {
        f64::INFINITY
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    fn machine_eps() -> Self {
        f32::EPSILON
    }
    fn nan() -> Self {
        f32::NAN
    }
    fn infinity() -> Self {
        f32::INFINITY
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

/// Tolerance that scales with the precision of `T`: `tol64` for `f64`, and
/// the equivalent number of ulps (floored at `eps^(1/2)`) for narrower types.
pub(crate) fn tol<T: Scalar>(tol64: f64) -> T {
    let eps = T::machine_eps().as_f64();
    if eps <= f64::EPSILON {
        T::lit(tol64)
    } else {
        T::lit((tol64 * eps / f64::EPSILON).max(eps.sqrt()).min(0.5))
    }
}
