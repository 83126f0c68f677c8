use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::market_data::ReturnPanel;
use crate::scalar::Scalar;

/// Rolling-window geometry in trading days (panel rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length: usize,
    pub step: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            length: 252,
            step: 5,
        }
    }
}

impl WindowSpec {
    pub fn new(length: usize, step: usize) -> Result<Self> {
        let spec = Self { length, step };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(invalid(format!("window length must be >= 2, got {}", self.length)));
        }
        if self.step == 0 {
            return Err(invalid("window step must be >= 1"));
        }
        if self.length <= self.step {
            return Err(invalid(format!(
                "window length {} must exceed step {}",
                self.length, self.step
            )));
        }
        Ok(())
    }
}

/// One rolling window over rows `start..=end` of a return panel.
///
/// `eval` is the first row that the window must not see: the evaluation
/// (allocation) date. It may equal the panel length for the last window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub end: usize,
    pub eval: usize,
    pub asof_date: NaiveDate,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Windows `[t - T, t - 1]` for `t = T, T + step, ...` while `t - 1` is a
/// valid row, ordered by time.
pub fn make_windows<T: Scalar>(panel: &ReturnPanel<T>, spec: &WindowSpec) -> Result<Vec<Window>> {
    spec.validate()?;
    let rows = panel.nrows();
    if rows < spec.length {
        return Err(Error::InsufficientData(format!(
            "panel has {rows} rows, window length is {}",
            spec.length
        )));
    }
    if spec.length < 2 * panel.ncols() {
        log::warn!(
            "window length {} is below twice the number of assets ({}); spectra will be noisy",
            spec.length,
            panel.ncols()
        );
    }
    let windows = (spec.length..=rows)
        .step_by(spec.step)
        .map(|t| Window {
            start: t - spec.length,
            end: t - 1,
            eval: t,
            asof_date: panel.dates()[t - 1],
        })
        .collect();
    Ok(windows)
}
