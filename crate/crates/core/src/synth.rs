//! Seeded synthetic price panels with known correlation structure, used for
//! testing and for demos when no market data is at hand.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::market_data::PricePanel;
use crate::regime::Label;
use crate::scalar::Scalar;
use crate::spectrum::Window;

/// Alternating calm/crisis segments of equicorrelated Gaussian log-returns,
/// `r_j = mu + sigma (sqrt(rho) f + sqrt(1 - rho) e_j)` with `rho` set by the
/// segment's regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoRegimeConfig {
    pub n_assets: usize,
    /// Number of price rows.
    pub n_days: usize,
    pub segment_len: usize,
    pub rho_calm: f64,
    pub rho_crisis: f64,
    /// Daily log-return volatility of every asset.
    pub vol: f64,
    /// Daily log-return drift in the calm regime.
    pub drift_calm: f64,
    /// Daily log-return drift in the crisis regime.
    pub drift_crisis: f64,
    pub start_date: NaiveDate,
    pub start_price: f64,
}

impl Default for TwoRegimeConfig {
    fn default() -> Self {
        Self {
            n_assets: 30,
            n_days: 2000,
            segment_len: 250,
            rho_calm: 0.2,
            rho_crisis: 0.7,
            vol: 0.01,
            drift_calm: 0.0,
            drift_crisis: 0.0,
            start_date: NaiveDate::from_ymd_opt(2006, 1, 2).expect("valid date"),
            start_price: 100.0,
        }
    }
}

impl TwoRegimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_assets == 0 {
            return Err(invalid("synthetic panel needs at least one asset"));
        }
        if self.n_days < 2 {
            return Err(invalid("synthetic panel needs at least two days"));
        }
        if self.segment_len == 0 {
            return Err(invalid("segment length must be positive"));
        }
        for (name, rho) in [("rho_calm", self.rho_calm), ("rho_crisis", self.rho_crisis)] {
            if !(0.0..=1.0).contains(&rho) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {rho}")));
            }
        }
        if !(self.vol > 0.0) || !self.vol.is_finite() {
            return Err(invalid(format!("vol must be positive, got {}", self.vol)));
        }
        if !(self.start_price > 0.0) || !self.start_price.is_finite() {
            return Err(invalid("start price must be positive"));
        }
        if !self.drift_calm.is_finite() || !self.drift_crisis.is_finite() {
            return Err(invalid("drifts must be finite"));
        }
        Ok(())
    }

    /// Regime of price row `day`; segments alternate starting calm.
    pub fn label_of_day(&self, day: usize) -> Label {
        if (day / self.segment_len) % 2 == 0 {
            Label::Calm
        } else {
            Label::Crisis
        }
    }
}

/// Synthetic prices with the regime that generated each row. The label of
/// row `d >= 1` is the regime of the return from row `d - 1` to `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanel<T: Scalar> {
    pub prices: PricePanel<T>,
    pub day_labels: Vec<Label>,
}

impl<T: Scalar> SyntheticPanel<T> {
    /// Labels aligned with the rows of the log-return panel.
    pub fn return_labels(&self) -> &[Label] {
        &self.day_labels[1..]
    }
}

/// Consecutive weekdays starting at `start` (moved forward to a weekday).
pub fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

fn tickers(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(2);
    (0..n).map(|j| format!("S{:0width$}", j + 1)).collect()
}

fn prices_from_returns<T: Scalar>(
    start_price: f64,
    start_date: NaiveDate,
    returns: &DMatrix<f64>,
    tag: &str,
) -> Result<PricePanel<T>> {
    let (days, n) = (returns.nrows() + 1, returns.ncols());
    let mut prices = DMatrix::<T>::zeros(days, n);
    for j in 0..n {
        let mut log_p = start_price.ln();
        prices[(0, j)] = T::lit(start_price);
        for d in 1..days {
            log_p += returns[(d - 1, j)];
            prices[(d, j)] = T::lit(log_p.exp());
        }
    }
    PricePanel::new(business_days(start_date, days), tickers(n), prices, tag)
}

/// Draws a two-regime panel; identical seeds give identical panels.
pub fn two_regime_panel<T: Scalar>(config: &TwoRegimeConfig, seed: u64) -> Result<SyntheticPanel<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.n_assets;
    let mut returns = DMatrix::<f64>::zeros(config.n_days - 1, n);
    let mut labels = Vec::with_capacity(config.n_days);
    labels.push(config.label_of_day(0));
    for d in 1..config.n_days {
        let label = config.label_of_day(d);
        labels.push(label);
        let (rho, mu) = match label {
            Label::Calm => (config.rho_calm, config.drift_calm),
            Label::Crisis => (config.rho_crisis, config.drift_crisis),
        };
        let f: f64 = StandardNormal.sample(&mut rng);
        for j in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            returns[(d - 1, j)] = mu + config.vol * (rho.sqrt() * f + (1.0 - rho).sqrt() * e);
        }
    }
    Ok(SyntheticPanel {
        prices: prices_from_returns(config.start_price, config.start_date, &returns, "synthetic")?,
        day_labels: labels,
    })
}

/// Every asset loads with unit beta on one Gaussian factor:
/// `r_j = factor_vol f + idio_vol e_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OneFactorConfig {
    pub n_assets: usize,
    pub n_days: usize,
    pub factor_vol: f64,
    pub idio_vol: f64,
    pub start_date: NaiveDate,
}

impl Default for OneFactorConfig {
    fn default() -> Self {
        Self {
            n_assets: 30,
            n_days: 1500,
            factor_vol: 0.02,
            idio_vol: 0.01,
            start_date: NaiveDate::from_ymd_opt(2006, 1, 2).expect("valid date"),
        }
    }
}

pub fn one_factor_panel<T: Scalar>(config: &OneFactorConfig, seed: u64) -> Result<PricePanel<T>> {
    if config.n_assets == 0 || config.n_days < 2 {
        return Err(invalid("one-factor panel needs an asset and two days"));
    }
    if !(config.factor_vol >= 0.0) || !(config.idio_vol > 0.0) {
        return Err(invalid("factor vol must be >= 0 and idiosyncratic vol > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut returns = DMatrix::<f64>::zeros(config.n_days - 1, config.n_assets);
    for d in 0..config.n_days - 1 {
        let f: f64 = StandardNormal.sample(&mut rng);
        for j in 0..config.n_assets {
            let e: f64 = StandardNormal.sample(&mut rng);
            returns[(d, j)] = config.factor_vol * f + config.idio_vol * e;
        }
    }
    prices_from_returns(100.0, config.start_date, &returns, "one_factor")
}

/// Majority label of the return rows covered by `window`; ties go to crisis.
pub fn window_label(return_labels: &[Label], window: &Window) -> Label {
    let crisis = return_labels[window.start..=window.end]
        .iter()
        .filter(|&&l| l == Label::Crisis)
        .count();
    if 2 * crisis >= window.len() {
        Label::Crisis
    } else {
        Label::Calm
    }
}
