use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::correlation::{correlation, CorrelationMatrix};
use super::eigen::eigendecompose;
use super::windows::{make_windows, Window, WindowSpec};
use crate::error::{invalid, Error, Result};
use crate::market_data::ReturnPanel;
use crate::scalar::Scalar;
use crate::stats;

/// Leading part of one window's spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWindow<T: Scalar> {
    pub window: Window,
    pub asof_date: NaiveDate,
    /// Top-k eigenvalues, descending.
    pub eigenvalues: DVector<T>,
    /// `N x k` matrix of the matching sign-fixed eigenvectors.
    pub eigenvectors: DMatrix<T>,
    pub window_vols: DVector<T>,
    pub mp_upper: T,
}

/// Correlation matrix of the rows covered by `window`.
pub fn window_correlation<T: Scalar>(
    panel: &ReturnPanel<T>,
    window: &Window,
) -> Result<CorrelationMatrix<T>> {
    let block = panel
        .returns()
        .rows(window.start, window.len())
        .into_owned();
    correlation(&block, panel.tickers(), window.asof_date)
}

/// Rolling top-k spectra, one record per window in time order.
///
/// Windows are processed in parallel; the output order is the window order.
pub fn spectral_series<T: Scalar>(
    panel: &ReturnPanel<T>,
    spec: &WindowSpec,
    top_k: usize,
) -> Result<Vec<SpectralWindow<T>>> {
    if top_k == 0 || top_k > panel.ncols() {
        return Err(invalid(format!(
            "top_k must lie in 1..={}, got {top_k}",
            panel.ncols()
        )));
    }
    let windows = make_windows(panel, spec)?;
    windows
        .par_iter()
        .map(|w| {
            let corr = window_correlation(panel, w)?;
            let spectrum = eigendecompose(&corr)?;
            Ok(SpectralWindow {
                window: *w,
                asof_date: w.asof_date,
                eigenvalues: spectrum.eigenvalues.rows(0, top_k).into_owned(),
                eigenvectors: spectrum.eigenvectors.columns(0, top_k).into_owned(),
                window_vols: corr.window_vols,
                mp_upper: spectrum.mp_upper,
            })
        })
        .collect()
}

/// Full-sample z-score (sample std). A constant series maps to zeros.
pub fn standardized_series<T: Scalar>(series: &[T]) -> Vec<T> {
    if series.len() < 2 {
        return vec![T::zero(); series.len()];
    }
    let m = stats::mean(series);
    let s = stats::sample_std(series);
    if !(s > T::zero()) {
        return vec![T::zero(); series.len()];
    }
    series.iter().map(|&x| (x - m) / s).collect()
}

/// Causal z-score: element `t` is standardized with the mean and sample std
/// of `series[..=t]`. The first element, and any prefix with zero spread,
/// maps to zero.
pub fn expanding_standardized_series<T: Scalar>(series: &[T]) -> Vec<T> {
    // Welford running moments
    let mut out = Vec::with_capacity(series.len());
    let mut mean = T::zero();
    let mut m2 = T::zero();
    for (i, &x) in series.iter().enumerate() {
        let n = T::from_count(i + 1);
        let delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
        if i == 0 {
            out.push(T::zero());
            continue;
        }
        let var = m2 / T::from_count(i);
        let std = if var > T::zero() { var.sqrt() } else { T::zero() };
        let scale = mean.abs().max(x.abs());
        if std <= T::lit(64.0) * T::machine_eps() * scale || std == T::zero() {
            out.push(T::zero());
        } else {
            out.push((x - mean) / std);
        }
    }
    out
}

/// Pearson correlation between several markets' standardized leading
/// eigenvalue series.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrelation<T: Scalar> {
    pub markets: Vec<String>,
    pub values: DMatrix<T>,
    /// ISO-week keys `(year, week)` shared by every market.
    pub common_weeks: Vec<(i32, u32)>,
}

/// Aligns each market's dated series on ISO weeks (last value of the week),
/// inner-joins the weeks and returns the pairwise Pearson matrix.
pub fn eigenvalue_cross_correlation<T: Scalar>(
    series_by_market: &BTreeMap<String, Vec<(NaiveDate, T)>>,
) -> Result<CrossCorrelation<T>> {
    if series_by_market.len() < 2 {
        return Err(invalid("cross-correlation needs at least 2 markets"));
    }
    let weekly: Vec<BTreeMap<(i32, u32), T>> = series_by_market
        .values()
        .map(|s| {
            let mut sorted = s.clone();
            sorted.sort_by_key(|(d, _)| *d);
            sorted
                .into_iter()
                .map(|(d, v)| {
                    let w = d.iso_week();
                    ((w.year(), w.week()), v)
                })
                .collect()
        })
        .collect();
    let common: Vec<(i32, u32)> = weekly[0]
        .keys()
        .filter(|k| weekly[1..].iter().all(|m| m.contains_key(k)))
        .copied()
        .collect();
    if common.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} common weeks across markets (need 3)",
            common.len()
        )));
    }
    let aligned: Vec<Vec<T>> = weekly
        .iter()
        .map(|m| common.iter().map(|k| m[k]).collect())
        .collect();
    let n = aligned.len();
    let mut values = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let r = stats::pearson(&aligned[i], &aligned[j]);
            values[(i, j)] = r;
            values[(j, i)] = r;
        }
    }
    Ok(CrossCorrelation {
        markets: series_by_market.keys().cloned().collect(),
        values,
        common_weeks: common,
    })
}
