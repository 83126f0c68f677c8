//! Cumulative returns and annualized risk-adjusted metrics of weekly series.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::stats;

/// Periods per year of the return series.
pub const WEEKS_PER_YEAR: f64 = 52.0;

/// What the weekly deviations in the volatility are measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolCentering {
    /// The annualized geometric mean, exactly as in the reference formula.
    #[default]
    AnnualizedMean,
    /// The arithmetic mean of the weekly returns.
    WeeklyMean,
}

/// A ratio together with a flag for a zero or vanishing denominator.
///
/// A degenerate ratio holds `+inf`/`-inf` following the sign of the
/// numerator, or `0` when the numerator is zero too.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioValue<T> {
    pub value: T,
    pub degenerate: bool,
}

/// True when a dispersion `d` of values bounded by `scale` is rounding noise.
fn negligible<T: Scalar>(d: T, scale: T) -> bool {
    !(d > T::lit(64.0) * T::machine_eps() * scale)
}

fn max_abs<T: Scalar>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

fn ratio<T: Scalar>(num: T, den: T, degenerate: bool) -> RatioValue<T> {
    if !degenerate {
        return RatioValue {
            value: num / den,
            degenerate,
        };
    }
    let value = if num > T::zero() {
        T::infinity()
    } else if num < T::zero() {
        -T::infinity()
    } else {
        T::zero()
    };
    RatioValue { value, degenerate }
}

/// `R(t) = prod_{s <= t} (1 + r_s) - 1`.
pub fn cumulative_returns<T: Scalar>(r: &[T]) -> Result<Vec<T>> {
    let mut growth = T::one();
    r.iter()
        .enumerate()
        .map(|(i, &x)| {
            if !(x > -T::one()) {
                return Err(invalid(format!(
                    "period return {} at index {i} is not above -1",
                    x.as_f64()
                )));
            }
            growth *= T::one() + x;
            Ok(growth - T::one())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnualizedStats<T> {
    pub mean_ann: T,
    pub vol_ann: T,
    pub sharpe: RatioValue<T>,
}

/// `(prod (1 + r))^(52 / M) - 1`.
pub fn annualized_mean<T: Scalar>(r: &[T]) -> Result<T> {
    if r.is_empty() {
        return Err(Error::InsufficientData("empty return series".into()));
    }
    let growth = cumulative_returns(r)?.last().copied().expect("non-empty") + T::one();
    Ok(growth.powf(T::lit(WEEKS_PER_YEAR) / T::from_count(r.len())) - T::one())
}

/// `sqrt(52 / (M - 1) sum (r - c)^2)` with `c` chosen by `centering`.
pub fn annualized_vol<T: Scalar>(r: &[T], centering: VolCentering) -> Result<T> {
    if r.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "volatility needs at least 2 returns, got {}",
            r.len()
        )));
    }
    let c = match centering {
        VolCentering::AnnualizedMean => annualized_mean(r)?,
        VolCentering::WeeklyMean => stats::mean(r),
    };
    let ss = r.iter().fold(T::zero(), |a, &x| a + (x - c) * (x - c));
    Ok((T::lit(WEEKS_PER_YEAR) / T::from_count(r.len() - 1) * ss).sqrt())
}

/// Annualized mean, volatility and Sharpe ratio at a zero risk-free rate.
pub fn annualized_stats<T: Scalar>(r: &[T], centering: VolCentering) -> Result<AnnualizedStats<T>> {
    let mean_ann = annualized_mean(r)?;
    let vol_ann = annualized_vol(r, centering)?;
    let scale = max_abs(r) * T::lit(WEEKS_PER_YEAR).sqrt();
    let sharpe = ratio(mean_ann, vol_ann, negligible(vol_ann, scale));
    Ok(AnnualizedStats {
        mean_ann,
        vol_ann,
        sharpe,
    })
}

/// Annualized mean over downside deviation `sqrt(52 / (M - 1) sum min(r, 0)^2)`.
/// A series without losses is degenerate.
pub fn sortino<T: Scalar>(r: &[T]) -> Result<RatioValue<T>> {
    let mean_ann = annualized_mean(r)?;
    if r.len() < 2 {
        return Err(Error::InsufficientData("Sortino ratio needs at least 2 returns".into()));
    }
    let ss = r.iter().fold(T::zero(), |a, &x| {
        let d = x.min(T::zero());
        a + d * d
    });
    let down = (T::lit(WEEKS_PER_YEAR) / T::from_count(r.len() - 1) * ss).sqrt();
    Ok(ratio(mean_ann, down, !(down > T::zero())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreynorValue<T> {
    pub treynor: RatioValue<T>,
    pub beta: T,
}

/// `beta = cov(r, r_mkt) / var(r_mkt)` and `mean_ann / beta`; `|beta| < 1e-10`
/// is degenerate.
pub fn treynor<T: Scalar>(r: &[T], r_mkt: &[T]) -> Result<TreynorValue<T>> {
    if r.len() != r_mkt.len() {
        return Err(Error::DimensionMismatch {
            expected: r.len(),
            found: r_mkt.len(),
        });
    }
    if r.len() < 2 {
        return Err(Error::InsufficientData("Treynor ratio needs at least 2 returns".into()));
    }
    let var = stats::sample_variance(r_mkt);
    if negligible(var.sqrt(), max_abs(r_mkt)) {
        return Err(Error::ZeroVariance("market proxy".into()));
    }
    let beta = stats::sample_covariance(r, r_mkt) / var;
    let mean_ann = annualized_mean(r)?;
    Ok(TreynorValue {
        treynor: ratio(mean_ann, beta, beta.abs() < T::lit(1e-10)),
        beta,
    })
}

/// Every summary statistic of one strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics<T> {
    pub mean_ann: T,
    pub vol_ann: T,
    pub sharpe: RatioValue<T>,
    pub sortino: RatioValue<T>,
    pub treynor: RatioValue<T>,
    pub beta_vs_ew: T,
}

pub fn compute_metrics<T: Scalar>(r: &[T], r_mkt: &[T], centering: VolCentering) -> Result<Metrics<T>> {
    let a = annualized_stats(r, centering)?;
    let t = treynor(r, r_mkt)?;
    Ok(Metrics {
        mean_ann: a.mean_ann,
        vol_ann: a.vol_ann,
        sharpe: a.sharpe,
        sortino: sortino(r)?,
        treynor: t.treynor,
        beta_vs_ew: t.beta,
    })
}
