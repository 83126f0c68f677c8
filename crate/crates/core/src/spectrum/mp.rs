//! Marchenko–Pastur benchmark for the spectrum of a null correlation matrix.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Support edges `(1 - sqrt c)^2` and `(1 + sqrt c)^2` for aspect ratio `c = N / T`.
pub fn mp_bounds<T: Scalar>(ratio_c: T) -> Result<(T, T)> {
    if !(ratio_c > T::zero()) || !ratio_c.is_finite_value() {
        return Err(invalid(format!(
            "MP aspect ratio must be positive, got {}",
            ratio_c.as_f64()
        )));
    }
    let s = ratio_c.sqrt();
    let lower = (T::one() - s) * (T::one() - s);
    let upper = (T::one() + s) * (T::one() + s);
    Ok((lower, upper))
}

/// Continuous part of the MP density at `lambda`; zero outside the support
/// and for a non-positive aspect ratio.
pub fn mp_density<T: Scalar>(lambda: T, ratio_c: T) -> T {
    let Ok((lower, upper)) = mp_bounds(ratio_c) else {
        return T::zero();
    };
    if lambda <= lower || lambda >= upper || lambda <= T::zero() {
        return T::zero();
    }
    ((upper - lambda) * (lambda - lower)).sqrt() / (T::two_pi() * ratio_c * lambda)
}

/// Normalized eigenvalue histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T: Scalar> {
    /// `bins + 1` increasing bin edges.
    pub edges: Vec<T>,
    /// Fraction of eigenvalues per bin; sums to one.
    pub mass: Vec<T>,
    /// `mass / bin width`; integrates to one.
    pub density: Vec<T>,
}

impl<T: Scalar> Histogram<T> {
    pub fn centers(&self) -> Vec<T> {
        self.edges
            .windows(2)
            .map(|w| (w[0] + w[1]) * T::lit(0.5))
            .collect()
    }
}

/// Histogram estimate of the spectral density over `[min, max]` of the
/// eigenvalues. When every eigenvalue is equal the range widens to a unit
/// interval centred on that value, so all mass lands in the middle bin.
pub fn empirical_spectral_density<T: Scalar>(eigenvalues: &[T], bins: usize) -> Result<Histogram<T>> {
    if eigenvalues.is_empty() {
        return Err(invalid("spectral density needs at least one eigenvalue"));
    }
    if bins == 0 {
        return Err(invalid("spectral density needs at least one bin"));
    }
    let mut lo = eigenvalues[0];
    let mut hi = eigenvalues[0];
    for &l in eigenvalues {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    if hi <= lo {
        lo -= T::lit(0.5);
        hi += T::lit(0.5);
    }
    let width = (hi - lo) / T::from_count(bins);
    let edges: Vec<T> = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + width * T::from_count(k) })
        .collect();
    let mut counts = vec![0usize; bins];
    for &l in eigenvalues {
        let idx = ((l - lo) / width).floor().as_f64();
        let idx = (idx.max(0.0) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let total = T::from_count(eigenvalues.len());
    let mass: Vec<T> = counts.iter().map(|&c| T::from_count(c) / total).collect();
    let density = mass.iter().map(|&m| m / width).collect();
    Ok(Histogram {
        edges,
        mass,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{correlation, eigendecompose};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    /// Composite Simpson rule on `[a, b]` with `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn bounds() {
        let (lo, hi) = mp_bounds(1e-12f64).unwrap();
        assert!((lo - 1.0).abs() < 1e-5 && (hi - 1.0).abs() < 1e-5);
        assert_eq!(mp_bounds(1.0).unwrap(), (0.0, 4.0));
        let c: f64 = 30.0 / 252.0;
        let (lo, hi) = mp_bounds(c).unwrap();
        // (1 -+ sqrt(30/252))^2 evaluated independently in double precision
        assert!((hi - 1.809_113_178_389_973).abs() < 1e-12, "{hi}");
        assert!((lo - 0.428_982_059_705_264_8).abs() < 1e-12, "{lo}");
        assert!(mp_bounds(0.0).is_err());
        assert!(mp_bounds(-0.1).is_err());
    }

    #[test]
    fn density_support_and_normalization() {
        let c = 0.25;
        let (lo, hi) = mp_bounds(c).unwrap();
        assert_eq!(mp_density(hi, c), 0.0);
        assert_eq!(mp_density(lo, c), 0.0);
        assert_eq!(mp_density(hi + 0.1, c), 0.0);
        assert_eq!(mp_density(lo - 0.1, c), 0.0);
        // square-root edges: substitute lambda = lo + (hi-lo) sin^2(theta)
        let integral = simpson(
            |th: f64| {
                let s = th.sin();
                let l = lo + (hi - lo) * s * s;
                mp_density(l, c) * (hi - lo) * 2.0 * s * th.cos()
            },
            0.0,
            std::f64::consts::FRAC_PI_2,
            2000,
        );
        assert!((integral - 1.0).abs() < 1e-4, "{integral}");
        let plain = simpson(|l| mp_density(l, c), lo, hi, 200_000);
        assert!((plain - 1.0).abs() < 1e-4, "{plain}");
    }

    #[test]
    fn histogram_edge_cases() {
        let h = empirical_spectral_density(&[1.0; 6], 5).unwrap();
        assert_eq!(h.mass.iter().filter(|&&m| m > 0.0).count(), 1);
        assert_eq!(h.mass[2], 1.0);
        let h = empirical_spectral_density(&[0.5, 1.5], 2).unwrap();
        assert_eq!(h.mass, vec![0.5, 0.5]);
        assert_eq!(h.edges, vec![0.5, 1.0, 1.5]);
        let integral: f64 = h
            .density
            .iter()
            .zip(h.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum();
        assert!((integral - 1.0).abs() < 1e-15);
        assert!(empirical_spectral_density::<f64>(&[], 3).is_err());
        assert!(empirical_spectral_density(&[1.0], 0).is_err());
    }

    #[test]
    fn wishart_histogram_tracks_mp_density() {
        // 10 null matrices with N = 100, T = 400 give 1000 eigenvalues at c = 0.25
        let (n, t, c) = (100, 400, 0.25);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let names: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let day = chrono::NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let mut eigs = Vec::new();
        for _ in 0..10 {
            let x: DMatrix<f64> = DMatrix::from_fn(t, n, |_, _| StandardNormal.sample(&mut rng));
            let s = eigendecompose(&correlation(&x, &names, day).unwrap()).unwrap();
            eigs.extend(s.eigenvalues.iter().copied());
        }
        let h = empirical_spectral_density(&eigs, 20).unwrap();
        let mut sup: f64 = 0.0;
        for (k, e) in h.edges.windows(2).enumerate() {
            // bin-averaged MP density by quadrature
            let avg = simpson(|l| mp_density(l, c), e[0], e[1], 400) / (e[1] - e[0]);
            sup = sup.max((h.density[k] - avg).abs());
        }
        assert!(sup < 0.1, "sup distance {sup}");
    }
}
