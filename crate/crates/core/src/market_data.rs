//! Price-panel ingestion, gap cleaning, log-returns and universe reshaping.
//!
//! A [`PricePanel`] is a dense date-by-ticker matrix. Cells that are missing
//! in the source file are stored as NaN until [`clean_panel`] either forward
//! fills them or drops the ticker.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Aligned date-by-ticker matrix of adjusted closing prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel<T: Scalar> {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: DMatrix<T>,
    source_tag: String,
}

impl<T: Scalar> PricePanel<T> {
    /// Builds a panel, checking shape and date ordering. Absent cells are NaN.
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        prices: DMatrix<T>,
        source_tag: impl Into<String>,
    ) -> Result<Self> {
        if prices.nrows() != dates.len() {
            return Err(Error::DimensionMismatch {
                expected: dates.len(),
                found: prices.nrows(),
            });
        }
        if prices.ncols() != tickers.len() {
            return Err(Error::DimensionMismatch {
                expected: tickers.len(),
                found: prices.ncols(),
            });
        }
        if dates.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "price panel needs at least 2 dates, got {}",
                dates.len()
            )));
        }
        if tickers.is_empty() {
            return Err(Error::EmptyUniverse);
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "dates must be strictly increasing ({} followed by {})",
                w[0], w[1]
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = tickers.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(invalid(format!("duplicate ticker `{dup}`")));
        }
        Ok(Self {
            dates,
            tickers,
            prices,
            source_tag: source_tag.into(),
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &DMatrix<T> {
        &self.prices
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn with_source_tag(mut self, tag: impl Into<String>) -> Self {
        self.source_tag = tag.into();
        self
    }

    pub fn nrows(&self) -> usize {
        self.dates.len()
    }

    pub fn ncols(&self) -> usize {
        self.tickers.len()
    }

    /// True when every cell holds a finite, strictly positive price.
    pub fn is_complete(&self) -> bool {
        self.prices.iter().all(|&p| is_present(p))
    }

    /// Number of absent cells.
    pub fn absent_cells(&self) -> usize {
        self.prices.iter().filter(|&&p| !is_present(p)).count()
    }
}

fn is_present<T: Scalar>(p: T) -> bool {
    p.is_finite_value() && p > T::zero()
}

/// Date-by-ticker matrix of log-returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel<T: Scalar> {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    returns: DMatrix<T>,
}

impl<T: Scalar> ReturnPanel<T> {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, returns: DMatrix<T>) -> Result<Self> {
        if returns.nrows() != dates.len() {
            return Err(Error::DimensionMismatch {
                expected: dates.len(),
                found: returns.nrows(),
            });
        }
        if returns.ncols() != tickers.len() {
            return Err(Error::DimensionMismatch {
                expected: tickers.len(),
                found: returns.ncols(),
            });
        }
        if tickers.is_empty() {
            return Err(Error::EmptyUniverse);
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "dates must be strictly increasing ({} followed by {})",
                w[0], w[1]
            )));
        }
        if returns.iter().any(|r| !r.is_finite_value()) {
            return Err(invalid("log-returns must be finite"));
        }
        Ok(Self {
            dates,
            tickers,
            returns,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn returns(&self) -> &DMatrix<T> {
        &self.returns
    }

    pub fn nrows(&self) -> usize {
        self.dates.len()
    }

    pub fn ncols(&self) -> usize {
        self.tickers.len()
    }
}

/// Thresholds deciding which tickers survive [`clean_panel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPolicy {
    /// Longest run of consecutive absent cells that may be forward filled.
    pub max_forward_fill_days: usize,
    /// Largest tolerated fraction of absent cells per ticker.
    pub max_missing_fraction: f64,
}

impl Default for GapPolicy {
    fn default() -> Self {
        Self {
            max_forward_fill_days: 5,
            max_missing_fraction: 0.05,
        }
    }
}

impl GapPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return Err(invalid(format!(
                "max_missing_fraction must lie in [0, 1], got {}",
                self.max_missing_fraction
            )));
        }
        Ok(())
    }
}

/// CSV layout accepted by [`load_price_panel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvFormat {
    /// Columns `date, ticker, close`, one observation per row.
    Long,
    /// A `date` column plus one price column per ticker.
    Wide,
}

impl std::str::FromStr for CsvFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "long" => Ok(Self::Long),
            "wide" => Ok(Self::Wide),
            other => Err(invalid(format!("unknown CSV format `{other}`"))),
        }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
}

fn parse_date(path: &Path, row: usize, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        row,
        column: "date".into(),
        message: format!("cannot parse `{raw}` as yyyy-mm-dd ({e})"),
    })
}

fn parse_price(path: &Path, row: usize, column: &str, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message: format!("cannot parse `{raw}` as a decimal price"),
    })
}

/// Reads a price panel from a UTF-8 CSV file with a header row.
///
/// Dates present for some tickers but not others yield absent (NaN) cells.
/// Rows are sorted by date; the source tag defaults to the file stem.
pub fn load_price_panel<T: Scalar>(path: impl AsRef<Path>, format: CsvFormat) -> Result<PricePanel<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);
    let headers = reader.headers()?.clone();

    let mut cells: BTreeMap<NaiveDate, HashMap<usize, f64>> = BTreeMap::new();
    let mut tickers: Vec<String> = Vec::new();

    match format {
        CsvFormat::Long => {
            let require = |name: &str| {
                column_index(&headers, name).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    row: 1,
                    column: name.to_string(),
                    message: "required column missing from header".into(),
                })
            };
            let (date_col, ticker_col, close_col) =
                (require("date")?, require("ticker")?, require("close")?);
            let mut ticker_index: HashMap<String, usize> = HashMap::new();
            for record in reader.records() {
                let record = record?;
                let row = record.position().map_or(0, |p| p.line() as usize);
                let date = parse_date(path, row, &record[date_col])?;
                let ticker = record[ticker_col].trim().to_string();
                if ticker.is_empty() {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row,
                        column: "ticker".into(),
                        message: "empty ticker".into(),
                    });
                }
                let raw = &record[close_col];
                let price = if raw.trim().is_empty() {
                    f64::NAN
                } else {
                    parse_price(path, row, "close", raw)?
                };
                let next = ticker_index.len();
                let idx = *ticker_index.entry(ticker.clone()).or_insert_with(|| {
                    tickers.push(ticker.clone());
                    next
                });
                if cells.entry(date).or_default().insert(idx, price).is_some() {
                    return Err(Error::DuplicateRow {
                        path: path.to_path_buf(),
                        date,
                        ticker,
                    });
                }
            }
        }
        CsvFormat::Wide => {
            let date_col = column_index(&headers, "date").ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row: 1,
                column: "date".into(),
                message: "required column missing from header".into(),
            })?;
            let price_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != date_col).collect();
            tickers = price_cols
                .iter()
                .map(|&c| headers[c].trim().to_string())
                .collect();
            for record in reader.records() {
                let record = record?;
                let row = record.position().map_or(0, |p| p.line() as usize);
                let date = parse_date(path, row, &record[date_col])?;
                let mut values = HashMap::with_capacity(price_cols.len());
                for (idx, &c) in price_cols.iter().enumerate() {
                    let raw = &record[c];
                    if !raw.trim().is_empty() {
                        values.insert(idx, parse_price(path, row, &tickers[idx], raw)?);
                    }
                }
                if cells.insert(date, values).is_some() {
                    return Err(Error::DuplicateRow {
                        path: path.to_path_buf(),
                        date,
                        ticker: tickers.first().cloned().unwrap_or_default(),
                    });
                }
            }
        }
    }

    if cells.is_empty() || tickers.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }

    let dates: Vec<NaiveDate> = cells.keys().copied().collect();
    let mut prices = DMatrix::from_element(dates.len(), tickers.len(), T::nan());
    for (i, row) in cells.values().enumerate() {
        for (&j, &p) in row {
            prices[(i, j)] = T::lit(p);
        }
    }
    let tag = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    PricePanel::new(dates, tickers, prices, tag)
}

/// Drops tickers with extended gaps and forward-fills the short ones.
///
/// Non-finite and non-positive cells count as absent. A ticker is dropped when
/// its absent fraction exceeds `max_missing_fraction`, when any run of absent
/// cells is longer than `max_forward_fill_days`, or when its first cell is
/// absent.
pub fn clean_panel<T: Scalar>(panel: &PricePanel<T>, policy: &GapPolicy) -> Result<PricePanel<T>> {
    policy.validate()?;
    let rows = panel.nrows();
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..panel.ncols() {
        let col = panel.prices.column(j);
        let ticker = &panel.tickers[j];
        let missing = col.iter().filter(|&&p| !is_present(p)).count();
        if !is_present(col[0]) {
            log::info!("dropping `{ticker}`: no price on first date {}", panel.dates[0]);
            continue;
        }
        if missing as f64 > policy.max_missing_fraction * rows as f64 {
            log::info!(
                "dropping `{ticker}`: {missing} of {rows} cells missing (limit {:.1}%)",
                100.0 * policy.max_missing_fraction
            );
            continue;
        }
        let mut run = 0usize;
        let mut longest = 0usize;
        for &p in col.iter() {
            if is_present(p) {
                run = 0;
            } else {
                run += 1;
                longest = longest.max(run);
            }
        }
        if longest > policy.max_forward_fill_days {
            log::info!(
                "dropping `{ticker}`: gap of {longest} rows exceeds {}",
                policy.max_forward_fill_days
            );
            continue;
        }
        kept.push(j);
    }
    if kept.is_empty() {
        return Err(Error::EmptyUniverse);
    }

    let mut prices = DMatrix::zeros(rows, kept.len());
    for (out_j, &j) in kept.iter().enumerate() {
        let mut last = panel.prices[(0, j)];
        for i in 0..rows {
            let p = panel.prices[(i, j)];
            if is_present(p) {
                last = p;
            }
            prices[(i, out_j)] = last;
        }
    }
    let tickers = kept.iter().map(|&j| panel.tickers[j].clone()).collect();
    PricePanel::new(panel.dates.clone(), tickers, prices, panel.source_tag.clone())
}

/// Elementwise `ln p(t) - ln p(t-1)`; the result has one row fewer than `panel`.
pub fn log_returns<T: Scalar>(panel: &PricePanel<T>) -> Result<ReturnPanel<T>> {
    for j in 0..panel.ncols() {
        for i in 0..panel.nrows() {
            let p = panel.prices[(i, j)];
            if !is_present(p) {
                return Err(Error::NonPositivePrice {
                    ticker: panel.tickers[j].clone(),
                    date: panel.dates[i],
                    price: p.as_f64(),
                });
            }
        }
    }
    let logs = panel.prices.map(|p| p.ln());
    let rows = panel.nrows() - 1;
    let returns = DMatrix::from_fn(rows, panel.ncols(), |i, j| logs[(i + 1, j)] - logs[(i, j)]);
    ReturnPanel::new(panel.dates[1..].to_vec(), panel.tickers.clone(), returns)
}

/// Keeps the last observation of every ISO week, dated on that observation.
pub fn resample_weekly<T: Scalar>(panel: &PricePanel<T>) -> Result<PricePanel<T>> {
    let mut keep: Vec<usize> = Vec::new();
    for (i, d) in panel.dates.iter().enumerate() {
        let week = d.iso_week();
        match panel.dates.get(i + 1) {
            Some(next) if next.iso_week() == week => {}
            _ => keep.push(i),
        }
    }
    let prices = panel.prices.select_rows(keep.iter());
    let dates = keep.iter().map(|&i| panel.dates[i]).collect();
    PricePanel::new(dates, panel.tickers.clone(), prices, panel.source_tag.clone())
}

/// Intersects the date sets of several panels and concatenates their columns.
///
/// Tickers are prefixed with `<source_tag>:` whenever the tag is non-empty.
pub fn merge_universes<T: Scalar>(panels: &[PricePanel<T>]) -> Result<PricePanel<T>> {
    if panels.len() < 2 {
        return Err(invalid(format!(
            "merging needs at least 2 panels, got {}",
            panels.len()
        )));
    }
    let mut common: HashSet<NaiveDate> = panels[0].dates.iter().copied().collect();
    for p in &panels[1..] {
        let other: HashSet<NaiveDate> = p.dates.iter().copied().collect();
        common.retain(|d| other.contains(d));
    }
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let mut dates: Vec<NaiveDate> = common.into_iter().collect();
    dates.sort_unstable();

    let mut tickers = Vec::new();
    let mut blocks = Vec::new();
    for p in panels {
        let rows: Vec<usize> = dates
            .iter()
            .map(|d| p.dates.binary_search(d).expect("date in intersection"))
            .collect();
        blocks.push(p.prices.select_rows(rows.iter()));
        tickers.extend(p.tickers.iter().map(|t| {
            if p.source_tag.is_empty() {
                t.clone()
            } else {
                format!("{}:{}", p.source_tag, t)
            }
        }));
    }
    let ncols = tickers.len();
    let mut prices = DMatrix::zeros(dates.len(), ncols);
    let mut offset = 0;
    for b in &blocks {
        prices.columns_mut(offset, b.ncols()).copy_from(b);
        offset += b.ncols();
    }
    let tag = panels
        .iter()
        .map(|p| p.source_tag.as_str())
        .collect::<Vec<_>>()
        .join("+");
    PricePanel::new(dates, tickers, prices, tag)
}
