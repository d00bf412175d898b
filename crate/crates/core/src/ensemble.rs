//! Residual-bootstrap ensembles of LPPL fits and the critical-time forecast
//! windows derived from them.
//!
//! Each selected fit spawns `n_bootstrap` synthetic series: the fitted curve
//! plus its own residuals resampled i.i.d. with replacement. Refits of those
//! series join the original fits, and nearest-rank quantiles of `tc` over
//! the whole ensemble give the published 20/80% and 5/95% date windows.

use std::fmt;

use chrono::NaiveDate;
use rand::Rng;
use thiserror::Error;

use crate::fitter::{multistart_fit_window, FitConfig, FitResult};
use crate::rng::{substream, STREAM_BOOTSTRAP};
use crate::timeseries::{offset_to_date, IngestError, PricePoint, PriceSeries};

/// Quantile levels of a published forecast.
pub const FORECAST_LEVELS: [f64; 4] = [0.05, 0.20, 0.80, 0.95];

/// Smallest ensemble for which a date window is published.
pub const MIN_H2_ENSEMBLE: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("fit did not converge; cannot bootstrap its residuals")]
    NotConverged,
    #[error("no candidate fits to bootstrap")]
    NoCandidates,
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("quantile level {0} outside (0, 1)")]
    InvalidLevel(f64),
    #[error("model evaluation failed: {0}")]
    Model(String),
    #[error(transparent)]
    Series(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapConfig {
    pub n_bootstrap: usize,
    /// Days past the last observation that forecasts may reach.
    pub horizon_days: i64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_bootstrap: 10,
            horizon_days: 182,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_bootstrap < 1 {
            return Err("n_bootstrap must be >= 1".into());
        }
        if self.horizon_days <= 0 {
            return Err("horizon_days must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemberOrigin {
    Original { candidate: usize },
    Bootstrap { candidate: usize, draw: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub fit: FitResult,
    pub origin: MemberOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub members: Vec<EnsembleMember>,
    pub source_asset: String,
    /// Date of day offset 0 of the fitted series.
    pub origin_date: NaiveDate,
    pub last_observation: NaiveDate,
    pub horizon_days: i64,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn horizon_end(&self) -> NaiveDate {
        self.last_observation + chrono::Duration::days(self.horizon_days)
    }
}

/// Fitted log-price curve of `fit` at each observation of `sub`, and the
/// residuals against it.
fn curve_and_residuals(
    fit: &FitResult,
    sub: &PriceSeries,
) -> Result<(Vec<f64>, Vec<f64>), EnsembleError> {
    let times = sub.times();
    let logp = sub.log_prices();
    let mut curve = Vec::with_capacity(times.len());
    for &t in &times {
        curve.push(
            fit.params
                .evaluate(t)
                .map_err(|e| EnsembleError::Model(e.to_string()))?,
        );
    }
    let residuals = logp.iter().zip(&curve).map(|(y, m)| y - m).collect();
    Ok((curve, residuals))
}

/// A synthetic series on the dates of `sub`: the fitted curve plus residuals
/// drawn with replacement from the fit's own residuals.
pub fn synthesize<R: Rng + ?Sized>(
    fit: &FitResult,
    sub: &PriceSeries,
    rng: &mut R,
) -> Result<PriceSeries, EnsembleError> {
    if !fit.converged {
        return Err(EnsembleError::NotConverged);
    }
    let (curve, residuals) = curve_and_residuals(fit, sub)?;
    let n = residuals.len();
    let points = sub
        .points()
        .iter()
        .zip(&curve)
        .map(|(p, m)| PricePoint {
            date: p.date,
            price: (m + residuals[rng.random_range(0..n)]).exp(),
        })
        .collect();
    Ok(PriceSeries::with_origin(
        sub.asset_id(),
        sub.origin(),
        points,
    )?)
}

/// Originals plus converged refits of `n_bootstrap` synthetic series per
/// candidate. Draw `b` of candidate `i` uses its own random substream.
pub fn build_ensemble(
    candidates: &[FitResult],
    series: &PriceSeries,
    cfg: &BootstrapConfig,
    fit_cfg: &FitConfig,
) -> Result<Ensemble, EnsembleError> {
    if candidates.is_empty() {
        return Err(EnsembleError::NoCandidates);
    }
    let mut members: Vec<EnsembleMember> = candidates
        .iter()
        .enumerate()
        .map(|(i, fit)| EnsembleMember {
            fit: fit.clone(),
            origin: MemberOrigin::Original { candidate: i },
        })
        .collect();

    for (i, fit) in candidates.iter().enumerate() {
        let (t1, t2) = fit.window;
        let sub = series.slice(t1, t2)?;
        for b in 0..cfg.n_bootstrap {
            let mut rng = substream(cfg.seed, &[STREAM_BOOTSTRAP, i as u64, b as u64]);
            let synthetic = synthesize(fit, &sub, &mut rng)?;
            if let Ok(refit) = multistart_fit_window(&synthetic, fit.window, fit_cfg) {
                if refit.converged {
                    members.push(EnsembleMember {
                        fit: refit,
                        origin: MemberOrigin::Bootstrap {
                            candidate: i,
                            draw: b,
                        },
                    });
                }
            }
        }
    }

    Ok(Ensemble {
        members,
        source_asset: series.asset_id().to_string(),
        origin_date: series.origin(),
        last_observation: series.last_date(),
        horizon_days: cfg.horizon_days,
    })
}

/// Nearest-rank quantile: the `ceil(level * n)`-th smallest value.
fn nearest_rank(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    // the epsilon keeps e.g. 0.2 * 100 from ranking as 21
    let rank = ((level * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

fn round_to_date(origin: NaiveDate, tc: f64) -> NaiveDate {
    offset_to_date(origin, tc.round() as i64)
}

fn raw_quantile_dates(
    ensemble: &Ensemble,
    levels: &[f64],
) -> Result<Vec<NaiveDate>, EnsembleError> {
    if ensemble.is_empty() {
        return Err(EnsembleError::EmptyEnsemble);
    }
    if let Some(&bad) = levels.iter().find(|&&l| !(l > 0.0 && l < 1.0)) {
        return Err(EnsembleError::InvalidLevel(bad));
    }
    let mut tcs: Vec<f64> = ensemble.members.iter().map(|m| m.fit.params.tc).collect();
    tcs.sort_by(f64::total_cmp);
    Ok(levels
        .iter()
        .map(|&l| round_to_date(ensemble.origin_date, nearest_rank(&tcs, l)))
        .collect())
}

/// Nearest-rank `tc` quantiles as calendar dates, capped at the end of the
/// extrapolation horizon.
pub fn tc_quantiles(
    ensemble: &Ensemble,
    levels: &[f64],
) -> Result<Vec<(f64, NaiveDate)>, EnsembleError> {
    let cap = ensemble.horizon_end();
    let dates = raw_quantile_dates(ensemble, levels)?;
    Ok(levels
        .iter()
        .zip(dates)
        .map(|(&l, d)| (l, d.min(cap)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    H1,
    H2,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::H1 => "H1",
            Status::H2 => "H2",
        })
    }
}

impl std::str::FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "H1" => Ok(Status::H1),
            "H2" => Ok(Status::H2),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct QuantileWindows {
    pub q05: NaiveDate,
    pub q20: NaiveDate,
    pub q80: NaiveDate,
    pub q95: NaiveDate,
}

/// One asset's published forecast. Quantile windows exist only for H2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForecastRecord {
    pub asset_id: String,
    pub status: Status,
    pub last_observation: NaiveDate,
    pub ensemble_size: usize,
    pub windows: Option<QuantileWindows>,
}

/// H2 with all four dates when the ensemble holds at least
/// [`MIN_H2_ENSEMBLE`] fits and the 20/80% window falls between the last
/// observation and the horizon end; H1 otherwise.
pub fn make_forecast(ensemble: &Ensemble) -> ForecastRecord {
    let h1 = ForecastRecord {
        asset_id: ensemble.source_asset.clone(),
        status: Status::H1,
        last_observation: ensemble.last_observation,
        ensemble_size: ensemble.len(),
        windows: None,
    };
    if ensemble.len() < MIN_H2_ENSEMBLE {
        return h1;
    }
    let Ok(raw) = raw_quantile_dates(ensemble, &FORECAST_LEVELS) else {
        return h1;
    };
    let cap = ensemble.horizon_end();
    if raw[1] < ensemble.last_observation || raw[2] > cap {
        return h1;
    }
    ForecastRecord {
        status: Status::H2,
        windows: Some(QuantileWindows {
            q05: raw[0].min(cap),
            q20: raw[1],
            q80: raw[2],
            q95: raw[3].min(cap),
        }),
        ..h1
    }
}
