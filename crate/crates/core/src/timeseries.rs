//! Daily price series: CSV ingestion, validation, windowing and the
//! log-price / return transforms used by the fitter and post-analysis.
//!
//! Time is measured in calendar days from the series origin. Weekends and
//! holidays are simply missing observations at their true offsets.

use chrono::NaiveDate;
use thiserror::Error;

const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("empty input")]
    Empty,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: price {price} is not strictly positive")]
    NonPositivePrice { line: usize, price: f64 },
    #[error("line {line}: date {date} does not strictly increase")]
    NonIncreasingDate { line: usize, date: NaiveDate },
    #[error("series too short: need at least {need} observations, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("invalid window: t1 = {t1} must be < t2 = {t2}")]
    InvalidRange { t1: i64, t2: i64 },
    #[error("window ({t1}, {t2}) outside series span [{first}, {last}]")]
    OutOfRange {
        t1: i64,
        t2: i64,
        first: i64,
        last: i64,
    },
    #[error("window ({t1}, {t2}) contains no observations")]
    EmptySlice { t1: i64, t2: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub price: f64,
}

/// Calendar dates mapped onto integer day offsets from an origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeIndex {
    pub origin: NaiveDate,
    pub offsets: Vec<i64>,
}

impl TimeIndex {
    pub fn date_at(&self, offset: i64) -> NaiveDate {
        offset_to_date(self.origin, offset)
    }
}

pub fn offset_to_date(origin: NaiveDate, offset: i64) -> NaiveDate {
    origin + chrono::Duration::days(offset)
}

pub fn date_to_offset(origin: NaiveDate, date: NaiveDate) -> i64 {
    (date - origin).num_days()
}

/// An ordered daily price series for one asset.
///
/// `origin` is the date of day offset 0. It is the first observation for a
/// freshly parsed series and is carried unchanged through [`PriceSeries::slice`],
/// so windows cut from the same series share one time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    asset_id: String,
    origin: NaiveDate,
    points: Vec<PricePoint>,
}

impl PriceSeries {
    /// Builds a series whose origin is its first date.
    pub fn new(asset_id: impl Into<String>, points: Vec<PricePoint>) -> Result<Self, IngestError> {
        let origin = points.first().ok_or(IngestError::Empty)?.date;
        Self::with_origin(asset_id, origin, points)
    }

    /// Builds a series measured against an explicit origin date, which must
    /// not come after the first observation.
    pub fn with_origin(
        asset_id: impl Into<String>,
        origin: NaiveDate,
        points: Vec<PricePoint>,
    ) -> Result<Self, IngestError> {
        let first = points.first().ok_or(IngestError::Empty)?;
        if first.date < origin {
            return Err(IngestError::NonIncreasingDate {
                line: 1,
                date: first.date,
            });
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.price.is_finite() && p.price > 0.0) {
                return Err(IngestError::NonPositivePrice {
                    line: i + 1,
                    price: p.price,
                });
            }
            if i > 0 && p.date <= points[i - 1].date {
                return Err(IngestError::NonIncreasingDate {
                    line: i + 1,
                    date: p.date,
                });
            }
        }
        Ok(Self {
            asset_id: asset_id.into(),
            origin,
            points,
        })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn origin(&self) -> NaiveDate {
        self.origin
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false: a constructed series holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.points.iter().map(|p| p.date).collect()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.price).collect()
    }

    pub fn time_index(&self) -> TimeIndex {
        TimeIndex {
            origin: self.origin,
            offsets: self.offsets(),
        }
    }

    pub fn offsets(&self) -> Vec<i64> {
        self.points
            .iter()
            .map(|p| date_to_offset(self.origin, p.date))
            .collect()
    }

    /// Day offsets as reals, the time variable of the LPPL model.
    pub fn times(&self) -> Vec<f64> {
        self.offsets().into_iter().map(|o| o as f64).collect()
    }

    pub fn first_offset(&self) -> i64 {
        date_to_offset(self.origin, self.points[0].date)
    }

    pub fn last_offset(&self) -> i64 {
        date_to_offset(self.origin, self.last_date())
    }

    pub fn last_date(&self) -> NaiveDate {
        self.points[self.points.len() - 1].date
    }

    pub fn log_prices(&self) -> Vec<f64> {
        log_prices(self)
    }

    /// Emits the CSV format accepted by [`parse_csv`], with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 + self.points.len() * 24);
        out.push_str("date,price\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.date.format(DATE_FORMAT), p.price));
        }
        out
    }

    /// All points with offsets in `[t1, t2]`; the origin is preserved.
    pub fn slice(&self, t1: i64, t2: i64) -> Result<PriceSeries, IngestError> {
        slice(self, t1, t2)
    }
}

/// Parses `YYYY-MM-DD,<price>` records, one per line, with an optional
/// `date,price` header.
pub fn parse_csv(bytes: &[u8], asset_id: &str) -> Result<PriceSeries, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IngestError::Malformed {
        line: 1 + bytes[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count(),
        reason: "invalid UTF-8".to_string(),
    })?;

    let mut points: Vec<PricePoint> = Vec::new();
    let mut seen_record = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !seen_record && line.eq_ignore_ascii_case("date,price") {
            seen_record = true;
            continue;
        }
        seen_record = true;

        let (date_str, price_str) = line.split_once(',').ok_or_else(|| IngestError::Malformed {
            line: line_no,
            reason: "expected `date,price`".to_string(),
        })?;
        let date = NaiveDate::parse_from_str(date_str.trim(), DATE_FORMAT).map_err(|e| {
            IngestError::Malformed {
                line: line_no,
                reason: format!("bad date `{}`: {e}", date_str.trim()),
            }
        })?;
        let price: f64 = price_str
            .trim()
            .parse()
            .map_err(|_| IngestError::Malformed {
                line: line_no,
                reason: format!("bad price `{}`", price_str.trim()),
            })?;
        if !(price.is_finite() && price > 0.0) {
            return Err(IngestError::NonPositivePrice {
                line: line_no,
                price,
            });
        }
        if let Some(prev) = points.last() {
            if date <= prev.date {
                return Err(IngestError::NonIncreasingDate {
                    line: line_no,
                    date,
                });
            }
        }
        points.push(PricePoint { date, price });
    }

    if points.is_empty() {
        return Err(IngestError::Empty);
    }
    PriceSeries::new(asset_id, points)
}

pub fn log_prices(series: &PriceSeries) -> Vec<f64> {
    series.points.iter().map(|p| p.price.ln()).collect()
}

/// One-day close-to-close returns, dated at the later observation.
pub fn daily_returns(series: &PriceSeries) -> Result<Vec<(NaiveDate, f64)>, IngestError> {
    if series.len() < 2 {
        return Err(IngestError::TooShort {
            need: 2,
            got: series.len(),
        });
    }
    Ok(series
        .points
        .windows(2)
        .map(|w| (w[1].date, w[1].price / w[0].price - 1.0))
        .collect())
}

pub fn slice(series: &PriceSeries, t1: i64, t2: i64) -> Result<PriceSeries, IngestError> {
    if t1 >= t2 {
        return Err(IngestError::InvalidRange { t1, t2 });
    }
    let first = series.first_offset();
    let last = series.last_offset();
    if t1 < first || t2 > last {
        return Err(IngestError::OutOfRange {
            t1,
            t2,
            first,
            last,
        });
    }
    let points: Vec<PricePoint> = series
        .points
        .iter()
        .filter(|p| {
            let o = date_to_offset(series.origin, p.date);
            o >= t1 && o <= t2
        })
        .copied()
        .collect();
    if points.is_empty() {
        return Err(IngestError::EmptySlice { t1, t2 });
    }
    Ok(PriceSeries {
        asset_id: series.asset_id.clone(),
        origin: series.origin,
        points,
    })
}
