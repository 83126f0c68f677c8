use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use chrono::NaiveDate;
use log::{info, warn};
use serde::Serialize;

use specreg::backtest::{performance_table, run_backtest, BacktestReport, PerformanceRow};
use specreg::factor::eigenportfolio_betas;
use specreg::market_data::{clean_panel, load_price_panel, log_returns, merge_universes, PricePanel, ReturnPanel};
use specreg::regime::regime_series;
use specreg::spectrum::{eigenvalue_cross_correlation, spectral_series, standardized_series};
use specreg::synth::two_regime_panel;

use crate::config::RunConfig;
use crate::output::{num, slug, write_json, write_rows, Table};

/// One universe ready for analysis.
struct Universe {
    name: String,
    returns: ReturnPanel<f64>,
}

fn load_universes(cfg: &RunConfig) -> Result<Vec<Universe>> {
    cfg.require_markets()?;
    let mut prices: Vec<(String, PricePanel<f64>)> = Vec::new();
    for (name, m) in &cfg.markets {
        let raw = load_price_panel::<f64>(&m.path, m.format)
            .with_context(|| format!("market `{name}`"))?
            .with_source_tag(name.as_str());
        let cleaned = clean_panel(&raw, &m.gap_policy()).with_context(|| format!("market `{name}`"))?;
        info!(
            "market `{name}`: {} dates, {} of {} tickers kept",
            cleaned.nrows(),
            cleaned.ncols(),
            raw.ncols()
        );
        prices.push((name.clone(), cleaned));
    }
    let mut out = Vec::new();
    for (name, p) in &prices {
        out.push(Universe {
            name: name.clone(),
            returns: log_returns(p).with_context(|| format!("market `{name}`"))?,
        });
    }
    if cfg.merged.enabled {
        let panels: Vec<PricePanel<f64>> = prices.into_iter().map(|(_, p)| p).collect();
        let merged = merge_universes(&panels).context("merging markets")?;
        info!("merged universe: {} common dates, {} tickers", merged.nrows(), merged.ncols());
        out.push(Universe {
            name: cfg.merged.name.clone(),
            returns: log_returns(&merged).context("merged universe")?,
        });
    }
    Ok(out)
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory `{}`", out.display()))
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        info!("wrote {}", p.display());
    }
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<()> {
    let universes = load_universes(cfg)?;
    create_dir(out)?;
    let spec = cfg.window_spec()?;
    let k = cfg.window.top_k;
    let mut written = Vec::new();
    let mut leading: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for u in &universes {
        if k > u.returns.ncols() {
            return Err(anyhow!(
                "universe `{}` has {} assets, fewer than window.top_k = {k}",
                u.name,
                u.returns.ncols()
            ));
        }
        let series = spectral_series(&u.returns, &spec, k).with_context(|| format!("universe `{}`", u.name))?;
        let z: Vec<Vec<f64>> = (0..k)
            .map(|j| standardized_series(&series.iter().map(|s| s.eigenvalues[j]).collect::<Vec<_>>()))
            .collect();
        let mut header = vec!["asof_date".to_string()];
        header.extend((1..=k).map(|j| format!("lambda_{j}")));
        header.extend((1..=k).map(|j| format!("z_lambda_{j}")));
        header.push("mp_upper".into());
        let mut t = Table::create(out, &format!("spectrum_{}.csv", slug(&u.name)), &header)?;
        for (i, s) in series.iter().enumerate() {
            let mut row = vec![s.asof_date.to_string()];
            row.extend(s.eigenvalues.iter().map(|&v| num(v)));
            row.extend(z.iter().map(|zj| num(zj[i])));
            row.push(num(s.mp_upper));
            t.row(&row)?;
        }
        written.push(t.finish()?);
        if u.name != cfg.merged.name || !cfg.merged.enabled {
            leading.insert(u.name.clone(), series.iter().map(|s| s.asof_date).zip(z[0].iter().copied()).collect());
        }
    }
    if leading.len() >= 2 {
        let cc = eigenvalue_cross_correlation(&leading).context("cross-correlation of leading eigenvalues")?;
        let mut header = vec!["market".to_string()];
        header.extend(cc.markets.iter().cloned());
        let mut t = Table::create(out, "eigenvalue_cross_correlation.csv", &header)?;
        for (i, m) in cc.markets.iter().enumerate() {
            let mut row = vec![m.clone()];
            row.extend((0..cc.markets.len()).map(|j| num(cc.values[(i, j)])));
            t.row(&row)?;
        }
        written.push(t.finish()?);
    }
    report_written(&written);
    Ok(())
}

pub fn regime(cfg: &RunConfig, out: &Path) -> Result<()> {
    let universes = load_universes(cfg)?;
    create_dir(out)?;
    let spec = cfg.window_spec()?;
    let mut written = Vec::new();
    for u in &universes {
        let series = spectral_series(&u.returns, &spec, 2).with_context(|| format!("universe `{}`", u.name))?;
        let reg = regime_series(&series, cfg.regime.ell, cfg.regime.mode)
            .with_context(|| format!("universe `{}`", u.name))?;
        let header = ["asof_date", "chi", "label"].map(String::from);
        let mut t = Table::create(out, &format!("regime_{}.csv", slug(&u.name)), &header)?;
        for i in 0..reg.len() {
            t.row([reg.asof_dates[i].to_string(), num(reg.chi[i]), reg.label[i].as_str().to_string()])?;
        }
        info!(
            "universe `{}`: {:.1}% of windows labelled crisis",
            u.name,
            100.0 * reg.crisis_fraction()
        );
        written.push(t.finish()?);
    }
    report_written(&written);
    Ok(())
}

#[derive(Serialize)]
struct BetaCsvRow {
    k: usize,
    alpha: f64,
    beta: f64,
    r_squared: f64,
    p_value: f64,
    n_obs: usize,
}

pub fn betas(cfg: &RunConfig, out: &Path) -> Result<()> {
    let universes = load_universes(cfg)?;
    create_dir(out)?;
    let spec = cfg.window_spec()?;
    let mut written = Vec::new();
    for u in &universes {
        let rows = eigenportfolio_betas(&u.returns, &spec, cfg.betas.top_k)
            .with_context(|| format!("universe `{}`", u.name))?;
        let rows: Vec<BetaCsvRow> = rows
            .iter()
            .map(|r| BetaCsvRow {
                k: r.k,
                alpha: r.ols.alpha,
                beta: r.ols.beta,
                r_squared: r.ols.r_squared,
                p_value: r.ols.p_value,
                n_obs: r.ols.n_obs,
            })
            .collect();
        written.push(write_rows(out, &format!("betas_{}.csv", slug(&u.name)), &rows)?);
    }
    report_written(&written);
    Ok(())
}

/// Flat summary row shared by the CSV and JSON outputs.
#[derive(Debug, Serialize)]
struct SummaryRow {
    universe: String,
    strategy: String,
    mean_ann_pct: f64,
    vol_ann_pct: f64,
    sharpe: f64,
    sortino: f64,
    treynor_pct: f64,
    beta_vs_ew: f64,
    best_mean_ann: bool,
    best_vol_ann: bool,
    best_sharpe: bool,
    best_sortino: bool,
    best_treynor: bool,
    audit_passed: bool,
    fallback_steps: usize,
}

impl SummaryRow {
    fn new(universe: &str, row: &PerformanceRow, report: &BacktestReport<f64>) -> Self {
        Self {
            universe: universe.to_string(),
            strategy: row.strategy.clone(),
            mean_ann_pct: row.mean_ann_pct,
            vol_ann_pct: row.vol_ann_pct,
            sharpe: row.sharpe,
            sortino: row.sortino,
            treynor_pct: row.treynor_pct,
            beta_vs_ew: row.beta_vs_ew,
            best_mean_ann: row.best.mean_ann,
            best_vol_ann: row.best.vol_ann,
            best_sharpe: row.best.sharpe,
            best_sortino: row.best.sortino,
            best_treynor: row.best.treynor,
            audit_passed: report.audit_passed(),
            fallback_steps: report.eigen_fallbacks
                + report
                    .weights_history
                    .iter()
                    .filter(|w| w.fallback != specreg::portfolio::FallbackLevel::None)
                    .count(),
        }
    }
}

fn write_backtest_series(out: &Path, name: &str, reports: &[BacktestReport<f64>]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let first = &reports[0];
    let mut header = vec!["asof_date".to_string(), "ew_market".to_string()];
    header.extend(reports.iter().map(|r| r.name().to_string()));
    let mut returns = Table::create(out, &format!("backtest_{name}_returns.csv"), &header)?;
    header.remove(1);
    let mut cumulative = Table::create(out, &format!("backtest_{name}_cumulative.csv"), &header)?;
    for i in 0..first.asof_dates.len() {
        let date = first.asof_dates[i].to_string();
        let mut row = vec![date.clone(), num(first.market_returns[i])];
        row.extend(reports.iter().map(|r| num(r.weekly_returns[i])));
        returns.row(&row)?;
        let mut row = vec![date];
        row.extend(reports.iter().map(|r| num(r.cumulative[i])));
        cumulative.row(&row)?;
    }
    written.push(returns.finish()?);
    written.push(cumulative.finish()?);
    for r in reports {
        let mut header = vec!["asof_date".to_string(), "label".to_string(), "fallback".to_string()];
        header.extend(r.tickers.iter().cloned());
        let mut t = Table::create(out, &format!("backtest_{name}_weights_{}.csv", r.name()), &header)?;
        for w in &r.weights_history {
            let mut row = vec![
                w.asof_date.to_string(),
                w.label.map_or(String::new(), |l| l.as_str().to_string()),
                w.fallback.as_str().to_string(),
            ];
            row.extend(w.weights.as_slice().iter().map(|&x| num(x)));
            t.row(&row)?;
        }
        written.push(t.finish()?);
    }
    Ok(written)
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:<12} {:<16} {:>10} {:>10} {:>8} {:>8} {:>11} {:>8}",
        "universe", "strategy", "mean_%", "vol_%", "sharpe", "sortino", "treynor_%", "beta"
    );
    let mark = |v: f64, best: bool, width: usize, prec: usize| {
        let s = format!("{v:.prec$}{}", if best { "*" } else { " " });
        format!("{s:>width$}")
    };
    for r in rows {
        println!(
            "{:<12} {:<16} {} {} {} {} {} {:>8.3}",
            r.universe,
            r.strategy,
            mark(r.mean_ann_pct, r.best_mean_ann, 10, 3),
            mark(r.vol_ann_pct, r.best_vol_ann, 10, 3),
            mark(r.sharpe, r.best_sharpe, 8, 3),
            mark(r.sortino, r.best_sortino, 8, 3),
            mark(r.treynor_pct, r.best_treynor, 11, 3),
            r.beta_vs_ew
        );
    }
    println!("* best value of the column within a universe");
}

pub fn backtest(cfg: &RunConfig, out: &Path) -> Result<()> {
    let universes = load_universes(cfg)?;
    create_dir(out)?;
    let spec = cfg.window_spec()?;
    let mut written = Vec::new();
    let mut summary = Vec::new();
    for u in &universes {
        // strategies are independent; run them side by side
        let reports: Vec<BacktestReport<f64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = cfg
                .strategies
                .kinds
                .iter()
                .map(|&kind| {
                    let s = cfg.strategy(kind);
                    let returns = &u.returns;
                    scope.spawn(move || run_backtest(returns, &spec, &s))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("backtest thread panicked"))
                .collect::<specreg::Result<Vec<_>>>()
        })
        .with_context(|| format!("universe `{}`", u.name))?;
        for r in &reports {
            if !r.audit_passed() {
                warn!(
                    "universe `{}`, strategy {}: look-ahead audit failed (indicator mode uses the full sample)",
                    u.name,
                    r.name()
                );
            }
        }
        let name = slug(&u.name);
        written.extend(write_backtest_series(out, &name, &reports)?);
        let rows: Vec<SummaryRow> = performance_table(&reports)
            .iter()
            .zip(&reports)
            .map(|(row, rep)| SummaryRow::new(&u.name, row, rep))
            .collect();
        written.push(write_rows(out, &format!("summary_{name}.csv"), &rows)?);
        summary.extend(rows);
    }
    written.push(write_json(out, "summary.json", &summary)?);
    print_summary(&summary);
    report_written(&written);
    Ok(())
}

pub fn synth(cfg: &RunConfig, seed: u64, out: &Path) -> Result<()> {
    let gen = cfg.synth.generator();
    let panel = two_regime_panel::<f64>(&gen, seed)?;
    create_dir(out)?;
    let p = &panel.prices;
    let mut header = vec!["date".to_string()];
    header.extend(p.tickers().iter().cloned());
    let mut prices = Table::create(out, "synthetic_prices.csv", &header)?;
    for (i, d) in p.dates().iter().enumerate() {
        let mut row = vec![d.to_string()];
        row.extend(p.prices().row(i).iter().map(|&x| num(x)));
        prices.row(&row)?;
    }
    let mut labels = Table::create(out, "synthetic_labels.csv", &["date".to_string(), "label".to_string()])?;
    for (d, l) in p.dates().iter().zip(&panel.day_labels) {
        labels.row([d.to_string(), l.as_str().to_string()])?;
    }
    if gen.rho_calm == gen.rho_crisis {
        warn!("rho_calm equals rho_crisis: the labels carry no signal and detection is at chance level");
    }
    let written = [prices.finish()?, labels.finish()?];
    report_written(&written);
    Ok(())
}
