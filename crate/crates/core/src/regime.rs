//! Calm/crisis classification from the dominance of the leading eigenvalue.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::spectrum::{expanding_standardized_series, standardized_series, SpectralWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Calm,
    Crisis,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Calm => "calm",
            Label::Crisis => "crisis",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the ratio series is standardized before smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorMode {
    /// Mean and std of the whole series. Uses future data.
    FullSample,
    /// Expanding mean and std up to each point.
    #[default]
    Causal,
}

impl FromStr for IndicatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_sample" => Ok(Self::FullSample),
            "causal" => Ok(Self::Causal),
            other => Err(invalid(format!(
                "unknown indicator mode {other:?} (expected full_sample or causal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSeries<T: Scalar> {
    pub asof_dates: Vec<NaiveDate>,
    pub chi: Vec<T>,
    pub label: Vec<Label>,
    pub smoothing_window_ell: usize,
    pub mode: IndicatorMode,
}

impl<T: Scalar> RegimeSeries<T> {
    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    pub fn crisis_fraction(&self) -> f64 {
        if self.label.is_empty() {
            return 0.0;
        }
        let n = self.label.iter().filter(|&&l| l == Label::Crisis).count();
        n as f64 / self.label.len() as f64
    }
}

/// `lambda_1 / lambda_2`, rejecting a non-positive denominator.
pub fn eigenvalue_ratio<T: Scalar>(lambda1: T, lambda2: T) -> Result<T> {
    if !(lambda2 > T::zero()) {
        return Err(Error::Degenerate(format!(
            "second eigenvalue {} is not positive",
            lambda2.as_f64()
        )));
    }
    Ok(lambda1 / lambda2)
}

/// Ratio of the two leading eigenvalues of every window.
pub fn raw_ratio<T: Scalar>(spectral: &[SpectralWindow<T>]) -> Result<Vec<T>> {
    spectral
        .iter()
        .map(|w| {
            if w.eigenvalues.len() < 2 {
                return Err(invalid(format!(
                    "window ending {} carries fewer than 2 eigenvalues",
                    w.asof_date
                )));
            }
            eigenvalue_ratio(w.eigenvalues[0], w.eigenvalues[1])
        })
        .collect()
}

/// Trailing average of length `ell`; the first `ell - 1` points average the
/// available prefix.
pub fn trailing_average<T: Scalar>(series: &[T], ell: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(series.len());
    let mut sum = T::zero();
    for (i, &x) in series.iter().enumerate() {
        sum += x;
        if i >= ell {
            sum -= series[i - ell];
        }
        out.push(sum / T::from_count((i + 1).min(ell)));
    }
    out
}

/// Standardized then smoothed ratio series.
pub fn crisis_indicator<T: Scalar>(ratio: &[T], ell: usize, mode: IndicatorMode) -> Result<Vec<T>> {
    if ell == 0 {
        return Err(invalid("smoothing window must be at least 1"));
    }
    if ratio.len() < ell {
        return Err(Error::InsufficientData(format!(
            "ratio series of length {} is shorter than the smoothing window {ell}",
            ratio.len()
        )));
    }
    let z = match mode {
        IndicatorMode::FullSample => standardized_series(ratio),
        IndicatorMode::Causal => expanding_standardized_series(ratio),
    };
    Ok(trailing_average(&z, ell))
}

/// Crisis whenever the indicator is non-negative.
pub fn classify<T: Scalar>(chi: &[T]) -> Vec<Label> {
    chi.iter()
        .map(|&c| if c >= T::zero() { Label::Crisis } else { Label::Calm })
        .collect()
}

/// Ratio, indicator and labels for a spectral series in one go.
pub fn regime_series<T: Scalar>(
    spectral: &[SpectralWindow<T>],
    ell: usize,
    mode: IndicatorMode,
) -> Result<RegimeSeries<T>> {
    let ratio = raw_ratio(spectral)?;
    let chi = crisis_indicator(&ratio, ell, mode)?;
    let label = classify(&chi);
    Ok(RegimeSeries {
        asof_dates: spectral.iter().map(|w| w.asof_date).collect(),
        chi,
        label,
        smoothing_window_ell: ell,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_examples() {
        assert_eq!(eigenvalue_ratio(1.0, 1.0).unwrap(), 1.0);
        // equicorrelation rho = 0.5, N = 10: (1 + 9 rho) / (1 - rho)
        let r: f64 = eigenvalue_ratio(1.0 + 9.0 * 0.5, 1.0 - 0.5).unwrap();
        assert!((r - 11.0).abs() < 1e-14);
        assert!(eigenvalue_ratio(1.0, 0.0).is_err());
        assert!(eigenvalue_ratio(1.0, -1e-3).is_err());
    }

    #[test]
    fn constant_ratio_gives_zero_indicator() {
        for mode in [IndicatorMode::FullSample, IndicatorMode::Causal] {
            let chi = crisis_indicator(&[3.0f64; 9], 2, mode).unwrap();
            assert!(chi.iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn step_series_flips_at_the_step() {
        let ratio: [f64; 8] = [0.0, 0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 10.0];
        let chi = crisis_indicator(&ratio, 1, IndicatorMode::FullSample).unwrap();
        // mean 5, sample std sqrt(8 * 25 / 7)
        let s = (200.0f64 / 7.0).sqrt();
        for (i, &c) in chi.iter().enumerate() {
            let expected = if i < 4 { -5.0 / s } else { 5.0 / s };
            assert!((c - expected).abs() < 1e-14);
        }
        let labels = classify(&chi);
        assert!(labels[..4].iter().all(|&l| l == Label::Calm));
        assert!(labels[4..].iter().all(|&l| l == Label::Crisis));
    }

    #[test]
    fn full_window_average_ends_at_zero() {
        let ratio: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 + 0.3 * i as f64).collect();
        let chi = crisis_indicator(&ratio, ratio.len(), IndicatorMode::FullSample).unwrap();
        assert!(chi.last().unwrap().abs() < 1e-14);
        let z = standardized_series(&ratio);
        let mut acc = 0.0;
        for (i, &c) in chi.iter().enumerate() {
            acc += z[i];
            assert!((c - acc / (i + 1) as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn trailing_average_uses_prefix() {
        let a = trailing_average(&[1.0f64, 2.0, 3.0, 4.0], 2);
        assert_eq!(a, vec![1.0, 1.5, 2.5, 3.5]);
        let a = trailing_average(&[1.0f64, 2.0, 3.0], 1);
        assert_eq!(a, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn causal_mode_ignores_the_future() {
        let ratio: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin() + 2.0).collect();
        let full = crisis_indicator(&ratio, 3, IndicatorMode::Causal).unwrap();
        let mut altered = ratio.clone();
        altered[15..].iter_mut().for_each(|x| *x += 100.0);
        let cut = crisis_indicator(&altered, 3, IndicatorMode::Causal).unwrap();
        assert_eq!(full[..15], cut[..15]);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify(&[-1.0f64, 0.0, 1.0]),
            vec![Label::Calm, Label::Crisis, Label::Crisis]
        );
        assert!(classify(&[-0.1f64, -3.0]).iter().all(|&l| l == Label::Calm));
    }

    #[test]
    fn indicator_argument_checks() {
        assert!(crisis_indicator(&[1.0f64, 2.0], 0, IndicatorMode::Causal).is_err());
        assert!(crisis_indicator(&[1.0f64, 2.0], 3, IndicatorMode::Causal).is_err());
        assert_eq!("causal".parse::<IndicatorMode>().unwrap(), IndicatorMode::Causal);
        assert!("centered".parse::<IndicatorMode>().is_err());
    }
}
