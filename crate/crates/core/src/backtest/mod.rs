//! Rolling, look-ahead-free backtest of the allocation strategies.
//!
//! For every window of past returns ending the day before a rebalance date,
//! the strategy's weights are computed and then held over the next block of
//! `step` days. Strategies share the estimation pipeline so they differ only
//! in how weights are chosen.

mod metrics;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cleaning::{corr_to_cov, denoise_with_spectrum, shrink_covariance};
use crate::error::{invalid, Error, Result};
use crate::market_data::ReturnPanel;
use crate::portfolio::{
    block_return, eigenportfolio, min_variance, regime_aware, EigenmodeConstraints, FallbackLevel,
    Weights,
};
use crate::regime::{classify, crisis_indicator, eigenvalue_ratio, IndicatorMode, Label};
use crate::scalar::Scalar;
use crate::spectrum::{correlation, eigendecompose, make_windows, sorted_eigen, Window, WindowSpec};

pub use metrics::{
    annualized_mean, annualized_stats, annualized_vol, compute_metrics, cumulative_returns, sortino,
    treynor, AnnualizedStats, Metrics, RatioValue, TreynorValue, VolCentering, WEEKS_PER_YEAR,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    EqualWeight,
    PrincipalEigen,
    MinVariance,
    RegimeAware,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::EqualWeight,
        StrategyKind::PrincipalEigen,
        StrategyKind::MinVariance,
        StrategyKind::RegimeAware,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::EqualWeight => "equal_weight",
            StrategyKind::PrincipalEigen => "principal_eigen",
            StrategyKind::MinVariance => "min_variance",
            StrategyKind::RegimeAware => "regime_aware",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown strategy `{s}`")))
    }
}

/// How the window correlation is turned into a covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cleaning {
    Raw,
    Clip,
    #[default]
    ClipAndShrink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub cleaning: Cleaning,
    /// Shrinkage intensity, used with [`Cleaning::ClipAndShrink`].
    pub delta: f64,
    /// Ceiling on the exposure to the leading eigenvector.
    pub gamma1: f64,
    /// Floor on the exposure to the second eigenvector.
    pub gamma2: f64,
    pub indicator_mode: IndicatorMode,
    /// Smoothing length of the crisis indicator, in rebalance steps.
    pub ell: usize,
    pub vol_centering: VolCentering,
}

impl Default for StrategySpec {
    fn default() -> Self {
        Self {
            kind: StrategyKind::EqualWeight,
            cleaning: Cleaning::ClipAndShrink,
            delta: 0.1,
            gamma1: 0.3,
            gamma2: 0.2,
            indicator_mode: IndicatorMode::Causal,
            ell: 2,
            vol_centering: VolCentering::AnnualizedMean,
        }
    }
}

impl StrategySpec {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(invalid(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        if !self.gamma1.is_finite() || !self.gamma2.is_finite() {
            return Err(invalid("eigenmode bounds must be finite"));
        }
        if self.ell == 0 {
            return Err(invalid("smoothing length ell must be at least 1"));
        }
        Ok(())
    }
}

/// Dates bracketing one rebalance decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub asof_date: NaiveDate,
    /// Latest date of any return that influenced the weights.
    pub max_consumed_date: NaiveDate,
    /// First date of the block the weights are applied to.
    pub first_applied_date: NaiveDate,
}

impl AuditRecord {
    pub fn passes(&self) -> bool {
        self.max_consumed_date < self.first_applied_date
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightRecord<T: Scalar> {
    pub asof_date: NaiveDate,
    /// Over the whole universe; assets dropped in this window hold zero.
    pub weights: Weights<T>,
    pub fallback: FallbackLevel,
    /// Regime of the window, for regime-aware strategies.
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport<T: Scalar> {
    pub strategy: StrategySpec,
    pub tickers: Vec<String>,
    /// Decision date of each step: the last date of its window.
    pub asof_dates: Vec<NaiveDate>,
    pub weekly_returns: Vec<T>,
    pub cumulative: Vec<T>,
    pub weights_history: Vec<WeightRecord<T>>,
    /// Equal-weight returns over the same blocks, the market proxy.
    pub market_returns: Vec<T>,
    pub metrics: Metrics<T>,
    pub audit: Vec<AuditRecord>,
    /// Steps where the principal eigenportfolio had a negative weight and
    /// equal weights were held instead.
    pub eigen_fallbacks: usize,
    /// Total number of assets dropped over all windows for zero variance.
    pub dropped_assets: usize,
}

impl<T: Scalar> BacktestReport<T> {
    pub fn audit_passed(&self) -> bool {
        self.audit.iter().all(AuditRecord::passes)
    }

    pub fn name(&self) -> &'static str {
        self.strategy.kind.as_str()
    }
}

/// Per-window estimates shared by every strategy.
struct WindowEstimate<T: Scalar> {
    active: Vec<usize>,
    vols: DVector<T>,
    /// `lambda_1 / lambda_2` of the raw correlation; `None` with one asset.
    ratio: Option<T>,
    /// Leading raw eigenvector over the active assets.
    v1_raw: Option<DVector<T>>,
    /// Covariance after cleaning, over the active assets.
    sigma: DMatrix<T>,
    /// Two leading eigenvectors of the cleaned correlation.
    v12_clean: Option<(DVector<T>, DVector<T>)>,
}

fn active_columns<T: Scalar>(block: &DMatrix<T>) -> Vec<usize> {
    let t = T::from_count(block.nrows());
    (0..block.ncols())
        .filter(|&j| {
            let col = block.column(j);
            let scale = col.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
            let mean = col.sum() / t;
            let ss = col.iter().fold(T::zero(), |a, &x| a + (x - mean) * (x - mean));
            let std = (ss / (t - T::one())).sqrt();
            std > T::lit(16.0) * T::machine_eps() * scale && std > T::zero()
        })
        .collect()
}

fn estimate_window<T: Scalar>(
    panel: &ReturnPanel<T>,
    window: &Window,
    strategy: &StrategySpec,
) -> Result<WindowEstimate<T>> {
    let block = panel.returns().rows(window.start, window.len()).into_owned();
    let active = active_columns(&block);
    if active.is_empty() {
        return Err(Error::EmptyUniverse);
    }
    let tickers = panel.tickers();
    for j in (0..panel.ncols()).filter(|j| !active.contains(j)) {
        warn!(
            "dropping `{}` from the window ending {}: zero variance",
            tickers[j], window.asof_date
        );
    }
    let sub = block.select_columns(&active);
    let names: Vec<String> = active.iter().map(|&j| tickers[j].clone()).collect();
    let corr = correlation(&sub, &names, window.asof_date)?;
    let n = active.len();
    if n == 1 {
        return Ok(WindowEstimate {
            active,
            vols: corr.window_vols.clone(),
            ratio: None,
            v1_raw: None,
            sigma: DMatrix::from_element(1, 1, corr.window_vols[0] * corr.window_vols[0]),
            v12_clean: None,
        });
    }
    let spectrum = eigendecompose(&corr)?;
    let ratio = eigenvalue_ratio(spectrum.eigenvalues[0], spectrum.eigenvalues[1])?;
    let v1_raw = spectrum.eigenvectors.column(0).into_owned();
    let (clean_corr, v12_clean) = match strategy.cleaning {
        Cleaning::Raw => {
            let v2 = spectrum.eigenvectors.column(1).into_owned();
            (corr.values.clone(), (v1_raw.clone(), v2))
        }
        Cleaning::Clip | Cleaning::ClipAndShrink => {
            let cleaned = denoise_with_spectrum(&spectrum)?;
            let (_, vecs) = sorted_eigen(&cleaned.values)?;
            let v1 = vecs.column(0).into_owned();
            let v2 = vecs.column(1).into_owned();
            (cleaned.values, (v1, v2))
        }
    };
    let mut sigma = corr_to_cov(&clean_corr, &corr.window_vols)?;
    if strategy.cleaning == Cleaning::ClipAndShrink {
        sigma = shrink_covariance(&sigma, T::lit(strategy.delta))?.values;
    }
    Ok(WindowEstimate {
        active,
        vols: corr.window_vols,
        ratio: Some(ratio),
        v1_raw: Some(v1_raw),
        sigma,
        v12_clean: Some(v12_clean),
    })
}

fn scatter<T: Scalar>(n: usize, active: &[usize], w: &DVector<T>) -> Result<Weights<T>> {
    let mut full = DVector::zeros(n);
    for (k, &j) in active.iter().enumerate() {
        full[j] = w[k];
    }
    Weights::new(full)
}

fn equal_over<T: Scalar>(n: usize, active: &[usize]) -> Result<Weights<T>> {
    let k = active.len();
    scatter(n, active, &DVector::from_element(k, T::one() / T::from_count(k)))
}

/// Runs `strategy` over every window of `panel` that is followed by a full
/// block of `spec.step` days.
pub fn run_backtest<T: Scalar>(
    panel: &ReturnPanel<T>,
    spec: &WindowSpec,
    strategy: &StrategySpec,
) -> Result<BacktestReport<T>> {
    strategy.validate()?;
    let windows: Vec<Window> = make_windows(panel, spec)?
        .into_iter()
        .filter(|w| w.eval + spec.step <= panel.nrows())
        .collect();
    if windows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "backtest needs at least 2 rebalance steps, the panel gives {}",
            windows.len()
        )));
    }
    let n = panel.ncols();
    let dates = panel.dates();

    let estimates: Vec<WindowEstimate<T>> = windows
        .par_iter()
        .map(|w| estimate_window(panel, w, strategy))
        .collect::<Result<_>>()?;
    let dropped_assets = estimates.iter().map(|e| n - e.active.len()).sum();

    let labels = if strategy.kind == StrategyKind::RegimeAware {
        // windows with a single asset carry the previous ratio forward
        let mut ratios = Vec::with_capacity(estimates.len());
        let mut last = T::one();
        for e in &estimates {
            if let Some(r) = e.ratio {
                last = r;
            }
            ratios.push(last);
        }
        let chi = crisis_indicator(&ratios, strategy.ell, strategy.indicator_mode)?;
        Some(classify(&chi))
    } else {
        None
    };
    // full-sample standardization reads every window, so every decision
    // depends on the last window's data
    let last_window_date = dates[windows.last().expect("non-empty").end];
    let future_leak = labels.is_some() && strategy.indicator_mode == IndicatorMode::FullSample;

    let mut eigen_fallbacks = 0;
    let mut weights_history = Vec::with_capacity(windows.len());
    let mut weekly_returns = Vec::with_capacity(windows.len());
    let mut market_returns = Vec::with_capacity(windows.len());
    let mut audit = Vec::with_capacity(windows.len());
    for (i, (w, e)) in windows.iter().zip(&estimates).enumerate() {
        let label = labels.as_ref().map(|l| l[i]);
        let ew = equal_over::<T>(n, &e.active)?;
        let (weights, fallback) = if e.active.len() == 1 {
            (ew.clone(), FallbackLevel::None)
        } else {
            match strategy.kind {
                StrategyKind::EqualWeight => (ew.clone(), FallbackLevel::None),
                StrategyKind::PrincipalEigen => {
                    let v1 = e.v1_raw.as_ref().expect("two or more assets");
                    let p = eigenportfolio(v1, &e.vols)?;
                    match p.weights() {
                        Some(wv) => (scatter(n, &e.active, wv.as_vector())?, FallbackLevel::None),
                        None => {
                            warn!(
                                "principal eigenportfolio on {} has negative weights, holding equal weights",
                                w.asof_date
                            );
                            eigen_fallbacks += 1;
                            (ew.clone(), FallbackLevel::None)
                        }
                    }
                }
                StrategyKind::MinVariance => {
                    let mv = min_variance(&e.sigma)?;
                    (scatter(n, &e.active, mv.as_vector())?, FallbackLevel::None)
                }
                StrategyKind::RegimeAware => {
                    if label == Some(Label::Crisis) {
                        let (v1, v2) = e.v12_clean.clone().expect("two or more assets");
                        let c = EigenmodeConstraints::new(
                            v1,
                            v2,
                            T::lit(strategy.gamma1),
                            T::lit(strategy.gamma2),
                        )?;
                        let sol = regime_aware(&e.sigma, &c)?;
                        (scatter(n, &e.active, sol.weights.as_vector())?, sol.fallback)
                    } else {
                        let mv = min_variance(&e.sigma)?;
                        (scatter(n, &e.active, mv.as_vector())?, FallbackLevel::None)
                    }
                }
            }
        };
        weekly_returns.push(block_return(weights.as_slice(), panel, w.eval, spec.step)?);
        market_returns.push(block_return(ew.as_slice(), panel, w.eval, spec.step)?);
        audit.push(AuditRecord {
            asof_date: w.asof_date,
            max_consumed_date: if future_leak {
                last_window_date
            } else {
                dates[w.end]
            },
            first_applied_date: dates[w.eval],
        });
        weights_history.push(WeightRecord {
            asof_date: w.asof_date,
            weights,
            fallback,
            label,
        });
    }
    let cumulative = cumulative_returns(&weekly_returns)?;
    let metrics = compute_metrics(&weekly_returns, &market_returns, strategy.vol_centering)?;
    Ok(BacktestReport {
        strategy: strategy.clone(),
        tickers: panel.tickers().to_vec(),
        asof_dates: windows.iter().map(|w| w.asof_date).collect(),
        weekly_returns,
        cumulative,
        weights_history,
        market_returns,
        metrics,
        audit,
        eigen_fallbacks,
        dropped_assets,
    })
}

/// Flags marking the best value of each column across strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BestFlags {
    pub mean_ann: bool,
    pub vol_ann: bool,
    pub sharpe: bool,
    pub sortino: bool,
    pub treynor: bool,
}

/// One row of the strategy comparison; returns and volatility in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRow {
    pub strategy: String,
    pub mean_ann_pct: f64,
    pub vol_ann_pct: f64,
    pub sharpe: f64,
    pub sortino: f64,
    pub treynor_pct: f64,
    pub beta_vs_ew: f64,
    pub best: BestFlags,
}

fn best_by(values: &[f64], higher_is_better: bool) -> Vec<bool> {
    let finite = values.iter().copied().filter(|v| !v.is_nan());
    let target = if higher_is_better {
        finite.fold(f64::NEG_INFINITY, f64::max)
    } else {
        finite.fold(f64::INFINITY, f64::min)
    };
    values.iter().map(|&v| v == target).collect()
}

/// Summary table with the best value per column flagged: highest mean,
/// Sharpe, Sortino and Treynor, lowest volatility.
pub fn performance_table<T: Scalar>(reports: &[BacktestReport<T>]) -> Vec<PerformanceRow> {
    let mut rows: Vec<PerformanceRow> = reports
        .iter()
        .map(|r| {
            let m = &r.metrics;
            PerformanceRow {
                strategy: r.name().to_string(),
                mean_ann_pct: 100.0 * m.mean_ann.as_f64(),
                vol_ann_pct: 100.0 * m.vol_ann.as_f64(),
                sharpe: m.sharpe.value.as_f64(),
                sortino: m.sortino.value.as_f64(),
                treynor_pct: 100.0 * m.treynor.value.as_f64(),
                beta_vs_ew: m.beta_vs_ew.as_f64(),
                best: BestFlags::default(),
            }
        })
        .collect();
    let col = |f: fn(&PerformanceRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let mean = best_by(&col(|r| r.mean_ann_pct), true);
    let vol = best_by(&col(|r| r.vol_ann_pct), false);
    let sharpe = best_by(&col(|r| r.sharpe), true);
    let sortino = best_by(&col(|r| r.sortino), true);
    let treynor = best_by(&col(|r| r.treynor_pct), true);
    for (i, row) in rows.iter_mut().enumerate() {
        row.best = BestFlags {
            mean_ann: mean[i],
            vol_ann: vol[i],
            sharpe: sharpe[i],
            sortino: sortino[i],
            treynor: treynor[i],
        };
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(returns: DMatrix<f64>) -> ReturnPanel<f64> {
        let dates = crate::synth::business_days(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), returns.nrows());
        let tickers = (0..returns.ncols()).map(|j| format!("A{j}")).collect();
        ReturnPanel::new(dates, tickers, returns).unwrap()
    }

    fn wavy(rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |i, j| {
            0.01 * ((i * (j + 2)) as f64 * 0.37 + j as f64).sin() + 0.004 * ((i + 3 * j) as f64 * 1.7).cos()
        })
    }

    #[test]
    fn single_asset_gets_its_own_weekly_returns() {
        let p = panel(wavy(40, 1));
        let spec = WindowSpec::new(10, 5).unwrap();
        for kind in StrategyKind::ALL {
            let rep = run_backtest(&p, &spec, &StrategySpec::new(kind)).unwrap();
            assert_eq!(rep.weekly_returns.len(), 6);
            for (k, &r) in rep.weekly_returns.iter().enumerate() {
                let start = 10 + 5 * k;
                let expected = (0..5).map(|d| p.returns()[(start + d, 0)]).sum::<f64>().exp() - 1.0;
                assert!((r - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reports_are_consistent() {
        let p = panel(wavy(80, 4));
        let spec = WindowSpec::new(20, 5).unwrap();
        for kind in StrategyKind::ALL {
            let rep = run_backtest(&p, &spec, &StrategySpec::new(kind)).unwrap();
            assert!(rep.audit_passed());
            assert_eq!(rep.weekly_returns.len(), rep.weights_history.len());
            let cum = cumulative_returns(&rep.weekly_returns).unwrap();
            for (a, b) in cum.iter().zip(&rep.cumulative) {
                assert!((a - b).abs() < 1e-10);
            }
            let m = compute_metrics(&rep.weekly_returns, &rep.market_returns, VolCentering::AnnualizedMean).unwrap();
            assert_eq!(m, rep.metrics);
        }
    }

    #[test]
    fn equal_weight_treynor_is_its_mean() {
        let p = panel(wavy(80, 4));
        let spec = WindowSpec::new(20, 5).unwrap();
        let rep = run_backtest(&p, &spec, &StrategySpec::new(StrategyKind::EqualWeight)).unwrap();
        assert!((rep.metrics.treynor.value - rep.metrics.mean_ann).abs() < 1e-10);
    }

    #[test]
    fn full_sample_indicator_fails_the_audit() {
        let p = panel(wavy(80, 4));
        let spec = WindowSpec::new(20, 5).unwrap();
        let strategy = StrategySpec {
            kind: StrategyKind::RegimeAware,
            indicator_mode: IndicatorMode::FullSample,
            ..Default::default()
        };
        let rep = run_backtest(&p, &spec, &strategy).unwrap();
        assert!(!rep.audit_passed());
    }

    #[test]
    fn constant_asset_is_dropped() {
        let mut r = wavy(60, 3);
        for i in 0..30 {
            r[(i, 2)] = 0.0;
        }
        let p = panel(r);
        let spec = WindowSpec::new(20, 5).unwrap();
        let rep = run_backtest(&p, &spec, &StrategySpec::new(StrategyKind::MinVariance)).unwrap();
        assert!(rep.dropped_assets > 0);
        assert_eq!(rep.weights_history[0].weights.as_slice()[2], 0.0);
    }

    #[test]
    fn table_flags() {
        let p = panel(wavy(80, 4));
        let spec = WindowSpec::new(20, 5).unwrap();
        let rep = run_backtest(&p, &spec, &StrategySpec::new(StrategyKind::MinVariance)).unwrap();
        let rows = performance_table(std::slice::from_ref(&rep));
        assert_eq!(rows.len(), 1);
        let b = rows[0].best;
        assert!(b.mean_ann && b.vol_ann && b.sharpe && b.sortino && b.treynor);
        let rows = performance_table(&[rep.clone(), rep]);
        assert_eq!(rows[0], rows[1]);
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.as_str().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("momentum".parse::<StrategyKind>().is_err());
    }
}
