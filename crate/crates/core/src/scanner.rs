//! Window grid enumeration and scanning of a price series.
//!
//! The end time `t2` steps back from the latest observation by `dt2`; for
//! each `t2` the start time `t1` steps back from `t2 - min_len` by `dt1`
//! until the window would exceed `max_len` or leave the series.

use std::cmp::Ordering;

use thiserror::Error;

use crate::fitter::{multistart_fit_window, FitConfig, FitError, FitResult};
use crate::timeseries::PriceSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("series spans {span} days, shorter than the minimum window of {min_len} days")]
    EmptyGrid { span: i64, min_len: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanConfig {
    pub dt1: i64,
    pub dt2: i64,
    pub min_len: i64,
    pub max_len: i64,
    pub n_t2: usize,
    pub top_k: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            dt1: 7,
            dt2: 7,
            min_len: 91,
            max_len: 1092,
            n_t2: 8,
            top_k: 10,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.dt1 < 1 || self.dt2 < 1 {
            return Err("dt1 and dt2 must be >= 1".into());
        }
        if !(0 < self.min_len && self.min_len <= self.max_len) {
            return Err(format!(
                "window lengths must satisfy 0 < min_len ({}) <= max_len ({})",
                self.min_len, self.max_len
            ));
        }
        if self.n_t2 < 1 {
            return Err("n_t2 must be >= 1".into());
        }
        Ok(())
    }
}

/// `(t1, t2)` day-offset pairs ordered by `t2` then `t1`, both descending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WindowGrid {
    pub windows: Vec<(i64, i64)>,
    /// Set when the series is shorter than `min_len` and no window fits.
    pub too_short: bool,
}

impl WindowGrid {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

pub fn enumerate_windows(series: &PriceSeries, cfg: &ScanConfig) -> WindowGrid {
    let first = series.first_offset();
    let last = series.last_offset();
    let mut windows = Vec::new();
    for k in 0..cfg.n_t2 as i64 {
        let t2 = last - k * cfg.dt2;
        if t2 - cfg.min_len < first {
            break;
        }
        let lowest = (t2 - cfg.max_len).max(first);
        let mut t1 = t2 - cfg.min_len;
        while t1 >= lowest {
            windows.push((t1, t2));
            t1 -= cfg.dt1;
        }
    }
    WindowGrid {
        too_short: windows.is_empty(),
        windows,
    }
}

/// Outcome of fitting one grid window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFit {
    pub window: (i64, i64),
    pub outcome: Result<FitResult, FitError>,
}

/// Fits every grid window holding at least `fit_cfg.min_observations`
/// observations. A failing window is recorded, not fatal.
pub fn scan(
    series: &PriceSeries,
    scan_cfg: &ScanConfig,
    fit_cfg: &FitConfig,
) -> Result<Vec<WindowFit>, ScanError> {
    let grid = enumerate_windows(series, scan_cfg);
    if grid.is_empty() {
        return Err(ScanError::EmptyGrid {
            span: series.last_offset() - series.first_offset(),
            min_len: scan_cfg.min_len,
        });
    }
    let mut out = Vec::with_capacity(grid.len());
    for &(t1, t2) in &grid.windows {
        let sub = match series.slice(t1, t2) {
            Ok(sub) if sub.len() >= fit_cfg.min_observations => sub,
            _ => continue,
        };
        out.push(WindowFit {
            window: (t1, t2),
            outcome: multistart_fit_window(&sub, (t1, t2), fit_cfg),
        });
    }
    Ok(out)
}

/// Successful fits of a scan, in grid order.
pub fn successful_fits(results: &[WindowFit]) -> Vec<FitResult> {
    results
        .iter()
        .filter_map(|w| w.outcome.as_ref().ok().cloned())
        .collect()
}

fn candidate_order(a: &FitResult, b: &FitResult) -> Ordering {
    a.rmse
        .total_cmp(&b.rmse)
        .then_with(|| b.window_len().cmp(&a.window_len()))
        .then_with(|| a.window.0.cmp(&b.window.0))
}

/// Qualified fits, best (lowest rmse) first, at most `top_k`. Ties go to
/// the longer window, then the earlier start.
pub fn select_candidates(results: &[FitResult], top_k: usize) -> Vec<FitResult> {
    let mut picked: Vec<FitResult> = results.iter().filter(|r| r.qualified).cloned().collect();
    picked.sort_by(candidate_order);
    picked.truncate(top_k);
    picked
}
