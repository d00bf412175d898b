//! Post-forecast measures over the data following a forecast date: the
//! largest drawdown, the running fraction of up days, and the local growth
//! rate from a Savitzky–Golay derivative of log-price.

use chrono::NaiveDate;
use thiserror::Error;

use crate::linalg::HouseholderQr;
use crate::timeseries::PriceSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {need} observations on or after {from}, found {got}")]
    InsufficientData {
        from: NaiveDate,
        need: usize,
        got: usize,
    },
    #[error("window of {window} needs more than {window} observations, series has {got}")]
    WindowTooLong { window: usize, got: usize },
    #[error("window must be at least {min}, got {got}")]
    WindowTooShort { min: usize, got: usize },
    #[error("polynomial order must be >= 1")]
    InvalidOrder,
    #[error("local polynomial fit is singular around {date}")]
    Singular { date: NaiveDate },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawdownReport {
    pub peak_date: NaiveDate,
    pub trough_date: NaiveDate,
    pub peak_price: f64,
    pub trough_price: f64,
    pub relative_drop: f64,
    pub absolute_drop: f64,
}

/// Drop from `peak` to `trough` relative to the peak; rises count as zero.
pub fn relative_drop(peak: f64, trough: f64) -> f64 {
    (1.0 - trough / peak).max(0.0)
}

/// Largest peak-to-trough decline among observations on or after
/// `from_date`. Equal drops resolve to the earliest peak, then the earliest
/// trough, so a series without any decline reports its first two points.
pub fn max_drawdown(
    series: &PriceSeries,
    from_date: NaiveDate,
) -> Result<DrawdownReport, AnalysisError> {
    let region: Vec<_> = series
        .points()
        .iter()
        .filter(|p| p.date >= from_date)
        .collect();
    if region.len() < 2 {
        return Err(AnalysisError::InsufficientData {
            from: from_date,
            need: 2,
            got: region.len(),
        });
    }
    let mut peak = 0;
    let mut best = (0, 1, relative_drop(region[0].price, region[1].price));
    for j in 1..region.len() {
        if region[j - 1].price > region[peak].price {
            peak = j - 1;
        }
        let drop = relative_drop(region[peak].price, region[j].price);
        if drop > best.2 {
            best = (peak, j, drop);
        }
    }
    let (i, j, drop) = best;
    let (p, q) = (region[i].price, region[j].price);
    Ok(DrawdownReport {
        peak_date: region[i].date,
        trough_date: region[j].date,
        peak_price: p,
        trough_price: q,
        relative_drop: drop,
        absolute_drop: if drop > 0.0 { p - q } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpFractionPoint {
    pub date: NaiveDate,
    pub window_days: usize,
    pub fraction: f64,
}

/// Share of positive one-day returns among the last `window_days` returns,
/// for every date with a full trailing window.
pub fn up_day_fraction(
    series: &PriceSeries,
    window_days: usize,
) -> Result<Vec<UpFractionPoint>, AnalysisError> {
    if window_days < 2 {
        return Err(AnalysisError::WindowTooShort {
            min: 2,
            got: window_days,
        });
    }
    let pts = series.points();
    if pts.len() <= window_days {
        return Err(AnalysisError::WindowTooLong {
            window: window_days,
            got: pts.len(),
        });
    }
    let up: Vec<u32> = pts
        .windows(2)
        .map(|w| u32::from(w[1].price > w[0].price))
        .collect();
    let mut count: u32 = up[..window_days].iter().sum();
    let mut out = Vec::with_capacity(up.len() - window_days + 1);
    for k in window_days..=up.len() {
        if k > window_days {
            count = count + up[k - 1] - up[k - 1 - window_days];
        }
        out.push(UpFractionPoint {
            date: pts[k].date,
            window_days,
            fraction: f64::from(count) / window_days as f64,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativePoint {
    pub date: NaiveDate,
    pub window_days: usize,
    pub growth_rate: f64,
}

/// Smallest odd observation count covering `window_days`.
pub fn odd_window(window_days: usize) -> usize {
    window_days | 1
}

/// First derivative of log-price per day, from a least-squares polynomial
/// of degree `poly_order` fitted over a centered window of observations.
/// The abscissa is the actual day offset, so calendar gaps are honoured.
pub fn sg_derivative(
    series: &PriceSeries,
    window_days: usize,
    poly_order: usize,
) -> Result<Vec<DerivativePoint>, AnalysisError> {
    if poly_order < 1 {
        return Err(AnalysisError::InvalidOrder);
    }
    let m = odd_window(window_days);
    if m < poly_order + 2 {
        return Err(AnalysisError::WindowTooShort {
            min: poly_order + 2,
            got: m,
        });
    }
    let n = series.len();
    if n < m {
        return Err(AnalysisError::WindowTooLong { window: m, got: n });
    }
    let times = series.times();
    let logp = series.log_prices();
    let dates = series.dates();
    let half = m / 2;
    let p = poly_order + 1;
    let mut out = Vec::with_capacity(n - m + 1);
    for c in half..n - half {
        let xs = &times[c - half..=c + half];
        let tc = times[c];
        let scale = (xs[m - 1] - tc).max(tc - xs[0]);
        let mut cols = Vec::with_capacity(m * p);
        for k in 0..p {
            cols.extend(xs.iter().map(|&t| ((t - tc) / scale).powi(k as i32)));
        }
        let qr = HouseholderQr::factor(cols, m, p)
            .map_err(|_| AnalysisError::Singular { date: dates[c] })?;
        let (coef, _) = qr.solve(&logp[c - half..=c + half]);
        out.push(DerivativePoint {
            date: dates[c],
            window_days: m,
            growth_rate: coef[1] / scale,
        });
    }
    Ok(out)
}

/// `date,value` CSV of a metric series.
pub fn metric_csv<I>(rows: I) -> String
where
    I: IntoIterator<Item = (NaiveDate, f64)>,
{
    let mut s = String::from("date,value\n");
    for (d, v) in rows {
        s.push_str(&format!("{},{}\n", d.format("%Y-%m-%d"), v));
    }
    s
}
