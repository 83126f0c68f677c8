//! Univariate regressions of the market proxy on eigenportfolio returns.

use nalgebra::DVector;
use rayon::prelude::*;
use statrs::function::beta::beta_reg;

use crate::error::{invalid, Error, Result};
use crate::market_data::ReturnPanel;
use crate::portfolio::{block_return, eigenportfolio};
use crate::scalar::Scalar;
use crate::spectrum::{spectral_series, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsResult<T: Scalar> {
    pub alpha: T,
    pub beta: T,
    pub r_squared: T,
    /// Two-sided p-value of `beta = 0` under the t distribution with
    /// `n_obs - 2` degrees of freedom.
    pub p_value: T,
    pub n_obs: usize,
}

/// Two-sided tail probability `P(|t_df| >= |t|)`.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Least-squares fit `y = alpha + beta x + e`.
pub fn ols<T: Scalar>(x: &[T], y: &[T]) -> Result<OlsResult<T>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let m = x.len();
    if m < 3 {
        return Err(Error::InsufficientData(format!(
            "regression needs at least 3 observations, got {m}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite_value()) {
        return Err(invalid("regression inputs must be finite"));
    }
    let n = T::from_count(m);
    let mx = x.iter().fold(T::zero(), |a, &v| a + v) / n;
    let my = y.iter().fold(T::zero(), |a, &v| a + v) / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&xi, &yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let x_scale = x.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    if !(sxx.sqrt() > T::lit(16.0) * T::machine_eps() * x_scale * n.sqrt()) {
        return Err(Error::ZeroVariance("regressor".into()));
    }
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let r_squared = if syy > T::zero() {
        (sxy * sxy / (sxx * syy)).min(T::one())
    } else {
        T::one()
    };
    let ssr = y
        .iter()
        .zip(x)
        .fold(T::zero(), |a, (&yi, &xi)| {
            let e = yi - alpha - beta * xi;
            a + e * e
        });
    let df = T::from_count(m - 2);
    // an exact fit leaves no residual variance: the slope is certain
    let p_value = if ssr <= T::lit(64.0) * T::machine_eps() * syy || ssr == T::zero() {
        T::zero()
    } else {
        let se = (ssr / df / sxx).sqrt();
        T::lit(student_t_two_sided((beta / se).as_f64(), df.as_f64()))
    };
    Ok(OlsResult {
        alpha,
        beta,
        r_squared,
        p_value,
        n_obs: m,
    })
}

/// Per-window out-of-sample returns of the first `top_k` eigenportfolios and
/// of the equal-weight market proxy.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenportfolioReturns<T: Scalar> {
    /// `returns[k][t]`: eigenportfolio `k + 1` over the block after window `t`.
    pub returns: Vec<Vec<T>>,
    pub market: Vec<T>,
    /// Windows whose eigenportfolio `k + 1` had a negative weight.
    pub non_investable: Vec<usize>,
}

/// Builds eigenportfolios in every window that is followed by a full
/// `spec.step`-day block and records their block returns together with
/// the equal-weight proxy's.
pub fn eigenportfolio_returns<T: Scalar>(
    panel: &ReturnPanel<T>,
    spec: &WindowSpec,
    top_k: usize,
) -> Result<EigenportfolioReturns<T>> {
    let spectral = spectral_series(panel, spec, top_k)?;
    let n = panel.ncols();
    let ew = vec![T::one() / T::from_count(n); n];
    let usable: Vec<_> = spectral
        .iter()
        .filter(|s| s.window.eval + spec.step <= panel.nrows())
        .collect();
    let rows: Vec<(Vec<T>, Vec<bool>, T)> = usable
        .par_iter()
        .map(|s| {
            let start = s.window.eval;
            let mut rets = Vec::with_capacity(top_k);
            let mut flags = Vec::with_capacity(top_k);
            for k in 0..top_k {
                let v: DVector<T> = s.eigenvectors.column(k).into_owned();
                let e = eigenportfolio(&v, &s.window_vols)?;
                rets.push(block_return(e.w.as_slice(), panel, start, spec.step)?);
                flags.push(!e.investable);
            }
            let mkt = block_return(&ew, panel, start, spec.step)?;
            Ok((rets, flags, mkt))
        })
        .collect::<Result<_>>()?;
    let mut out = EigenportfolioReturns {
        returns: vec![Vec::with_capacity(rows.len()); top_k],
        market: Vec::with_capacity(rows.len()),
        non_investable: vec![0; top_k],
    };
    for (rets, flags, mkt) in rows {
        for k in 0..top_k {
            out.returns[k].push(rets[k]);
            if flags[k] {
                out.non_investable[k] += 1;
            }
        }
        out.market.push(mkt);
    }
    Ok(out)
}

/// One regression of the market proxy on eigenportfolio `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaRow<T: Scalar> {
    /// 1-based eigenportfolio index.
    pub k: usize,
    pub ols: OlsResult<T>,
}

/// Regresses the equal-weight market return on each of the first `top_k`
/// eigenportfolio returns, all measured over the block after each window.
pub fn eigenportfolio_betas<T: Scalar>(
    panel: &ReturnPanel<T>,
    spec: &WindowSpec,
    top_k: usize,
) -> Result<Vec<BetaRow<T>>> {
    let r = eigenportfolio_returns(panel, spec, top_k)?;
    if r.market.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} out-of-sample blocks, need at least 3",
            r.market.len()
        )));
    }
    r.returns
        .iter()
        .enumerate()
        .map(|(k, x)| {
            Ok(BetaRow {
                k: k + 1,
                ols: ols(x, &r.market)?,
            })
        })
        .collect()
}
