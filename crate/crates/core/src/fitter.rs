//! Multi-start least-squares fitting of the LPPL model to a log-price window.
//!
//! For a fixed nonlinear triple `(tc, alpha, omega)` the amplitudes
//! `(A, B, C1, C2)` are the exact linear least-squares solution, so the
//! search runs over three dimensions only. The local search is a bounded
//! Levenberg-Marquardt iteration on the projected residual, with the
//! Jacobian taken as the model derivative projected onto the orthogonal
//! complement of the linear basis.

use rand::Rng;
use thiserror::Error;

use crate::linalg::{cholesky_solve, HouseholderQr};
use crate::lppl::{
    basis, basis_with_partials, to_canonical, LinearQuad, LpplParams, ModelError, NonlinearTriple,
    QualificationFilter,
};
use crate::rng::{substream, STREAM_FIT_STARTS};
use crate::timeseries::PriceSeries;

/// Fewest observations [`subordinate_linear`] accepts.
pub const MIN_LINEAR_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("times has {times} entries but log-prices has {logp}")]
    LengthMismatch { times: usize, logp: usize },
    #[error("too few observations: need {need}, got {got}")]
    TooFewObservations { need: usize, got: usize },
    #[error("times must be strictly increasing")]
    UnorderedTimes,
    #[error("tc = {tc} coincides with a sample time")]
    SingularTc { tc: f64 },
    #[error("linear basis is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("non-finite cost at tc = {tc}, alpha = {alpha}, omega = {omega}")]
    NonFinite { tc: f64, alpha: f64, omega: f64 },
    #[error("start {start:?} lies outside the search bounds")]
    StartOutOfBounds { start: NonlinearTriple },
    #[error("invalid window ({t1}, {t2})")]
    InvalidWindow { t1: i64, t2: i64 },
    #[error("all {starts} starts failed; last error: {last}")]
    AllStartsFailed { starts: usize, last: String },
}

impl From<ModelError> for FitError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Singular { tc } => FitError::SingularTc { tc },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Minimum number of local searches; random starts top up the
    /// deterministic grid when it is smaller.
    pub n_starts: usize,
    /// Initial `tc` as `t2 + frac * (t2 - t1)`.
    pub tc_grid: Vec<f64>,
    pub alpha_starts: Vec<f64>,
    pub omega_starts: Vec<f64>,
    pub max_iterations: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub alpha_bounds: (f64, f64),
    pub omega_bounds: (f64, f64),
    /// Upper `tc` bound as a multiple of the window length past `t2`.
    pub tc_span_factor: f64,
    /// Smallest gap in days between `t2` and the lower `tc` bound.
    pub tc_min_gap: f64,
    pub min_observations: usize,
    pub filter: QualificationFilter,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_starts: 40,
            tc_grid: vec![0.02, 0.1, 0.25, 0.5],
            alpha_starts: vec![0.2, 0.5, 0.8],
            omega_starts: vec![5.0, 8.0, 11.0, 15.0],
            max_iterations: 500,
            rel_tol: 1e-10,
            seed: 0,
            alpha_bounds: (0.01, 0.99),
            omega_bounds: (1.0, 40.0),
            tc_span_factor: 2.0,
            tc_min_gap: 0.1,
            min_observations: 30,
            filter: QualificationFilter::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_starts == 0 {
            return Err("n_starts must be >= 1".into());
        }
        if !(self.rel_tol > 0.0) {
            return Err("rel_tol must be > 0".into());
        }
        if self.max_iterations == 0 {
            return Err("max_iterations must be >= 1".into());
        }
        let (alo, ahi) = self.alpha_bounds;
        if !(0.0 < alo && alo < ahi && ahi < 1.0) {
            return Err(format!(
                "alpha bounds ({alo}, {ahi}) must satisfy 0 < lo < hi < 1"
            ));
        }
        let (olo, ohi) = self.omega_bounds;
        if !(0.0 < olo && olo < ohi) {
            return Err(format!(
                "omega bounds ({olo}, {ohi}) must satisfy 0 < lo < hi"
            ));
        }
        if !(self.tc_span_factor > 0.0) || !(self.tc_min_gap > 0.0) {
            return Err("tc_span_factor and tc_min_gap must be > 0".into());
        }
        if self.min_observations < MIN_LINEAR_POINTS {
            return Err(format!("min_observations must be >= {MIN_LINEAR_POINTS}"));
        }
        self.filter.validate()
    }
}

/// A fitted window.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: LpplParams,
    /// Sum of squared log-price residuals.
    pub cost: f64,
    pub rmse: f64,
    /// `(t1, t2)` day offsets.
    pub window: (i64, i64),
    pub n_points: usize,
    pub converged: bool,
    pub qualified: bool,
}

impl FitResult {
    pub fn window_len(&self) -> i64 {
        self.window.1 - self.window.0
    }
}

/// Log-price observations of one window together with its nominal bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub times: Vec<f64>,
    pub logp: Vec<f64>,
    pub window: (i64, i64),
}

impl FitProblem {
    pub fn new(times: Vec<f64>, logp: Vec<f64>, window: (i64, i64)) -> Result<Self, FitError> {
        if times.len() != logp.len() {
            return Err(FitError::LengthMismatch {
                times: times.len(),
                logp: logp.len(),
            });
        }
        if window.0 >= window.1 {
            return Err(FitError::InvalidWindow {
                t1: window.0,
                t2: window.1,
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FitError::UnorderedTimes);
        }
        Ok(Self {
            times,
            logp,
            window,
        })
    }

    /// Window spanning the first and last observation of `sub`.
    pub fn from_series(sub: &PriceSeries) -> Result<Self, FitError> {
        let window = (sub.first_offset(), sub.last_offset());
        Self::from_series_window(sub, window)
    }

    pub fn from_series_window(sub: &PriceSeries, window: (i64, i64)) -> Result<Self, FitError> {
        Self::new(sub.times(), sub.log_prices(), window)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn t2(&self) -> f64 {
        self.window.1 as f64
    }
}

/// Box constraints of the nonlinear search for one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBounds {
    pub tc: (f64, f64),
    pub alpha: (f64, f64),
    pub omega: (f64, f64),
}

impl SearchBounds {
    pub fn for_window(window: (i64, i64), config: &FitConfig) -> Self {
        let (t1, t2) = (window.0 as f64, window.1 as f64);
        let len = t2 - t1;
        Self {
            tc: (t2 + config.tc_min_gap, t2 + config.tc_span_factor * len),
            alpha: config.alpha_bounds,
            omega: config.omega_bounds,
        }
    }

    pub fn contains(&self, nl: &NonlinearTriple) -> bool {
        let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
        inside(nl.tc, self.tc) && inside(nl.alpha, self.alpha) && inside(nl.omega, self.omega)
    }

    fn clamp(&self, theta: [f64; 3]) -> [f64; 3] {
        [
            theta[0].clamp(self.tc.0, self.tc.1),
            theta[1].clamp(self.alpha.0, self.alpha.1),
            theta[2].clamp(self.omega.0, self.omega.1),
        ]
    }
}

fn triple(theta: [f64; 3]) -> NonlinearTriple {
    NonlinearTriple {
        tc: theta[0],
        alpha: theta[1],
        omega: theta[2],
    }
}

struct LinearSolve {
    qr: HouseholderQr,
    coef: [f64; 4],
    cost: f64,
}

fn solve_linear(
    nl: &NonlinearTriple,
    times: &[f64],
    logp: &[f64],
) -> Result<LinearSolve, FitError> {
    let n = times.len();
    let mut cols = vec![0.0; 4 * n];
    for (i, &t) in times.iter().enumerate() {
        let row = basis(nl, t)?;
        for (j, v) in row.iter().enumerate() {
            cols[j * n + i] = *v;
        }
    }
    if cols.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite {
            tc: nl.tc,
            alpha: nl.alpha,
            omega: nl.omega,
        });
    }
    let qr = HouseholderQr::factor(cols, n, 4)
        .map_err(|e| FitError::RankDeficient { column: e.column })?;
    let (c, cost) = qr.solve(logp);
    if !cost.is_finite() || c.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite {
            tc: nl.tc,
            alpha: nl.alpha,
            omega: nl.omega,
        });
    }
    Ok(LinearSolve {
        qr,
        coef: [c[0], c[1], c[2], c[3]],
        cost,
    })
}

fn check_linear_inputs(times: &[f64], logp: &[f64]) -> Result<(), FitError> {
    if times.len() != logp.len() {
        return Err(FitError::LengthMismatch {
            times: times.len(),
            logp: logp.len(),
        });
    }
    if times.len() < MIN_LINEAR_POINTS {
        return Err(FitError::TooFewObservations {
            need: MIN_LINEAR_POINTS,
            got: times.len(),
        });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FitError::UnorderedTimes);
    }
    Ok(())
}

/// Exact least-squares amplitudes for a fixed nonlinear triple, via QR of
/// the basis `{1, f, f cos(omega ln|t - tc|), f sin(omega ln|t - tc|)}`.
/// Returns the amplitudes and the residual sum of squares.
pub fn subordinate_linear(
    nl: &NonlinearTriple,
    times: &[f64],
    logp: &[f64],
) -> Result<(LinearQuad, f64), FitError> {
    check_linear_inputs(times, logp)?;
    let s = solve_linear(nl, times, logp)?;
    Ok((
        LinearQuad {
            a: s.coef[0],
            b: s.coef[1],
            c1: s.coef[2],
            c2: s.coef[3],
        },
        s.cost,
    ))
}

struct RefineOutcome {
    theta: [f64; 3],
    lq: LinearQuad,
    cost: f64,
    converged: bool,
    trace: Vec<f64>,
}

/// Gauss-Newton system of the projected residual at `theta`.
fn normal_equations(
    theta: [f64; 3],
    problem: &FitProblem,
    lin: &LinearSolve,
) -> Result<([[f64; 3]; 3], [f64; 3]), FitError> {
    let n = problem.len();
    let nl = triple(theta);
    let mut jac = vec![vec![0.0; n]; 3];
    for (i, &t) in problem.times.iter().enumerate() {
        let (_, partials) = basis_with_partials(&nl, t)?;
        for k in 0..3 {
            jac[k][i] = (0..4).map(|j| lin.coef[j] * partials[k][j]).sum();
        }
    }
    let mut residual = problem.logp.clone();
    lin.qr.project_out(&mut residual);
    for col in jac.iter_mut() {
        lin.qr.project_out(col);
    }
    let mut m = [[0.0; 3]; 3];
    let mut g = [0.0; 3];
    for a in 0..3 {
        g[a] = jac[a].iter().zip(&residual).map(|(x, r)| x * r).sum();
        for b in a..3 {
            let v: f64 = jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum();
            m[a][b] = v;
            m[b][a] = v;
        }
    }
    if m.iter().flatten().chain(g.iter()).any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite {
            tc: nl.tc,
            alpha: nl.alpha,
            omega: nl.omega,
        });
    }
    Ok((m, g))
}

const LAMBDA_INIT: f64 = 1e-3;

/// Damped Gauss-Newton step with bound handling: a parameter sitting on a
/// bound whose step points outward is frozen and the reduced system is
/// solved again, so the free parameters are not dragged by a clipped one.
fn bounded_step(
    theta: [f64; 3],
    m: &[[f64; 3]; 3],
    g: &[f64; 3],
    lambda: f64,
    max_diag: f64,
    bounds: &SearchBounds,
) -> Option<[f64; 3]> {
    let limits = [bounds.tc, bounds.alpha, bounds.omega];
    let mut frozen = [false; 3];
    for _ in 0..3 {
        let mut a = *m;
        let mut b = *g;
        for k in 0..3 {
            a[k][k] += lambda * m[k][k].max(1e-12 * max_diag);
            if frozen[k] {
                for j in 0..3 {
                    a[k][j] = 0.0;
                    a[j][k] = 0.0;
                }
                a[k][k] = 1.0;
                b[k] = 0.0;
            }
        }
        let step = cholesky_solve(&a, &b)?;
        let mut changed = false;
        for k in 0..3 {
            let (lo, hi) = limits[k];
            let outward = (theta[k] <= lo && step[k] < 0.0) || (theta[k] >= hi && step[k] > 0.0);
            if !frozen[k] && outward {
                frozen[k] = true;
                changed = true;
            }
        }
        if !changed {
            return Some(bounds.clamp([
                theta[0] + step[0],
                theta[1] + step[1],
                theta[2] + step[2],
            ]));
        }
    }
    None
}
const LAMBDA_MAX: f64 = 1e16;

fn refine(
    start: &NonlinearTriple,
    problem: &FitProblem,
    config: &FitConfig,
) -> Result<RefineOutcome, FitError> {
    check_linear_inputs(&problem.times, &problem.logp)?;
    let bounds = SearchBounds::for_window(problem.window, config);
    if !bounds.contains(start) {
        return Err(FitError::StartOutOfBounds { start: *start });
    }

    let mut theta = [start.tc, start.alpha, start.omega];
    let mut current = solve_linear(start, &problem.times, &problem.logp)?;
    let mut trace = vec![current.cost];
    let mean = problem.logp.iter().sum::<f64>() / problem.len() as f64;
    let tss: f64 = problem.logp.iter().map(|y| (y - mean) * (y - mean)).sum();
    let floor = 1e-28 * tss.max(problem.len() as f64 * 1e-4);

    let mut lambda = LAMBDA_INIT;
    let mut trials = 0usize;
    let mut converged = false;

    'outer: loop {
        if current.cost <= floor {
            converged = true;
            break;
        }
        if trials >= config.max_iterations {
            break;
        }
        let (m, g) = normal_equations(theta, problem, &current)?;
        let max_diag = m[0][0].max(m[1][1]).max(m[2][2]);
        if !(max_diag > 0.0) {
            // cost is flat in every direction
            converged = true;
            break;
        }

        loop {
            if trials >= config.max_iterations {
                break 'outer;
            }
            trials += 1;
            let candidate = bounded_step(theta, &m, &g, lambda, max_diag, &bounds);
            let trial = match candidate {
                Some(c) if c != theta => solve_linear(&triple(c), &problem.times, &problem.logp)
                    .ok()
                    .filter(|s| s.cost < current.cost)
                    .map(|s| (c, s)),
                _ => None,
            };
            match trial {
                Some((c, s)) => {
                    let previous = current.cost;
                    theta = c;
                    current = s;
                    trace.push(current.cost);
                    lambda = (lambda * 0.3).max(1e-12);
                    if previous - current.cost <= config.rel_tol * previous {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        // no descent direction left within the bounds
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }

    Ok(RefineOutcome {
        theta,
        lq: LinearQuad {
            a: current.coef[0],
            b: current.coef[1],
            c1: current.coef[2],
            c2: current.coef[3],
        },
        cost: current.cost,
        converged,
        trace,
    })
}

fn to_result(outcome: &RefineOutcome, problem: &FitProblem, config: &FitConfig) -> FitResult {
    let lq = snap_negligible(outcome.lq, &triple(outcome.theta), problem);
    let params = to_canonical(&triple(outcome.theta), &lq);
    let n = problem.len();
    FitResult {
        params,
        cost: outcome.cost,
        rmse: (outcome.cost / n as f64).sqrt(),
        window: problem.window,
        n_points: n,
        converged: outcome.converged,
        qualified: config.filter.accepts(&params, problem.t2()),
    }
}

/// Zeroes amplitudes whose largest contribution over the window is at the
/// rounding level of the data, so that e.g. a flat series reports `B = 0`
/// rather than a sign-ambiguous 1e-17.
fn snap_negligible(mut lq: LinearQuad, nl: &NonlinearTriple, problem: &FitProblem) -> LinearQuad {
    let scale = 1.0 + problem.logp.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let f_max = problem
        .times
        .iter()
        .filter_map(|&t| basis(nl, t).ok())
        .fold(0.0f64, |m, row| m.max(row[1]));
    let threshold = 1e-10 * scale;
    for amp in [&mut lq.b, &mut lq.c1, &mut lq.c2] {
        if amp.abs() * f_max <= threshold {
            *amp = 0.0;
        }
    }
    lq
}

/// One bounded local search from `start`. The result's cost never
/// exceeds the cost at `start`.
pub fn local_refine(
    start: &NonlinearTriple,
    problem: &FitProblem,
    config: &FitConfig,
) -> Result<FitResult, FitError> {
    local_refine_traced(start, problem, config).map(|(r, _)| r)
}

/// Like [`local_refine`], also returning the cost after every accepted step
/// (the first entry is the cost at `start`).
pub fn local_refine_traced(
    start: &NonlinearTriple,
    problem: &FitProblem,
    config: &FitConfig,
) -> Result<(FitResult, Vec<f64>), FitError> {
    let outcome = refine(start, problem, config)?;
    let result = to_result(&outcome, problem, config);
    Ok((result, outcome.trace))
}

/// Deterministic grid starts followed by seeded random starts up to
/// `config.n_starts`.
pub fn start_points(window: (i64, i64), config: &FitConfig) -> Vec<NonlinearTriple> {
    let bounds = SearchBounds::for_window(window, config);
    let len = (window.1 - window.0) as f64;
    let t2 = window.1 as f64;
    let mut starts = Vec::new();
    for &frac in &config.tc_grid {
        for &alpha in &config.alpha_starts {
            for &omega in &config.omega_starts {
                let theta = bounds.clamp([t2 + frac * len, alpha, omega]);
                starts.push(triple(theta));
            }
        }
    }
    if starts.len() < config.n_starts {
        let mut rng = substream(config.seed, &[STREAM_FIT_STARTS]);
        let tc_hi = bounds.tc.0 + 0.5 * (bounds.tc.1 - bounds.tc.0);
        let alpha_range = (
            config.filter.alpha_min.max(bounds.alpha.0),
            config.filter.alpha_max.min(bounds.alpha.1),
        );
        let omega_range = (
            config.filter.omega_min.max(bounds.omega.0),
            config.filter.omega_max.min(bounds.omega.1),
        );
        while starts.len() < config.n_starts {
            let tc = rng.random_range(bounds.tc.0..=tc_hi);
            let alpha = rng.random_range(alpha_range.0..=alpha_range.1);
            let omega = rng.random_range(omega_range.0..=omega_range.1);
            starts.push(triple(bounds.clamp([tc, alpha, omega])));
        }
    }
    starts
}

/// Fits a prepared window from every start and keeps the lowest-cost
/// converged result.
pub fn multistart_fit_problem(
    problem: &FitProblem,
    config: &FitConfig,
) -> Result<FitResult, FitError> {
    if problem.len() < config.min_observations {
        return Err(FitError::TooFewObservations {
            need: config.min_observations,
            got: problem.len(),
        });
    }
    let starts = start_points(problem.window, config);
    let mut best: Option<RefineOutcome> = None;
    let mut last_error = None;
    for start in &starts {
        match refine(start, problem, config) {
            Ok(outcome) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        outcome.cost < b.cost
                            || (outcome.cost == b.cost && outcome.converged && !b.converged)
                    }
                };
                if better {
                    best = Some(outcome);
                }
            }
            Err(e) => last_error = Some(e),
        }
    }
    match best {
        Some(b) => Ok(to_result(&b, problem, config)),
        None => Err(FitError::AllStartsFailed {
            starts: starts.len(),
            last: last_error.map(|e| e.to_string()).unwrap_or_default(),
        }),
    }
}

/// Fits a sub-series over the window spanned by its own observations.
pub fn multistart_fit(sub: &PriceSeries, config: &FitConfig) -> Result<FitResult, FitError> {
    let problem = FitProblem::from_series(sub)?;
    multistart_fit_problem(&problem, config)
}

/// Fits a sub-series cut from a longer series over its nominal `(t1, t2)`.
pub fn multistart_fit_window(
    sub: &PriceSeries,
    window: (i64, i64),
    config: &FitConfig,
) -> Result<FitResult, FitError> {
    let problem = FitProblem::from_series_window(sub, window)?;
    multistart_fit_problem(&problem, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lppl::{evaluate, qualify};
    use crate::timeseries::{offset_to_date, PricePoint};
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn truth() -> LpplParams {
        LpplParams {
            a: 5.0,
            b: -0.05,
            c: 0.006,
            alpha: 0.4,
            omega: 8.0,
            phi: 1.0,
            tc: 539.0,
        }
    }

    fn synthetic_problem(p: &LpplParams, n: usize) -> FitProblem {
        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let logp = times.iter().map(|&t| evaluate(p, t).unwrap()).collect();
        FitProblem::new(times, logp, (0, n as i64 - 1)).unwrap()
    }

    fn series_from_logp(times: &[f64], logp: &[f64]) -> PriceSeries {
        let origin = NaiveDate::from_ymd_opt(2008, 1, 1).unwrap();
        let pts = times
            .iter()
            .zip(logp)
            .map(|(&t, &y)| PricePoint {
                date: offset_to_date(origin, t as i64),
                price: y.exp(),
            })
            .collect();
        PriceSeries::new("SYN", pts).unwrap()
    }

    #[test]
    fn linear_solve_recovers_planted_amplitudes() {
        let p = truth();
        let prob = synthetic_problem(&p, 500);
        let (lq, cost) = subordinate_linear(&p.nonlinear(), &prob.times, &prob.logp).unwrap();
        let want = p.linear();
        for (got, exp) in [
            (lq.a, want.a),
            (lq.b, want.b),
            (lq.c1, want.c1),
            (lq.c2, want.c2),
        ] {
            assert!((got - exp).abs() < 1e-9, "{got} vs {exp}");
        }
        assert!(cost <= 1e-18 * 500.0, "cost {cost}");
    }

    #[test]
    fn linear_solve_of_constant_data() {
        let times: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let logp = vec![2.5; 50];
        let nl = NonlinearTriple {
            tc: 70.0,
            alpha: 0.5,
            omega: 6.0,
        };
        let (lq, cost) = subordinate_linear(&nl, &times, &logp).unwrap();
        assert!((lq.a - 2.5).abs() < 1e-12);
        assert!(lq.b.abs() < 1e-12 && lq.c1.abs() < 1e-12 && lq.c2.abs() < 1e-12);
        assert!(cost < 1e-24);
    }

    #[test]
    fn linear_solve_input_errors() {
        let nl = NonlinearTriple {
            tc: 70.0,
            alpha: 0.5,
            omega: 6.0,
        };
        let times: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(matches!(
            subordinate_linear(&nl, &times, &[1.0; 19]),
            Err(FitError::LengthMismatch { .. })
        ));
        assert!(matches!(
            subordinate_linear(&nl, &times[..5], &[1.0; 5]),
            Err(FitError::TooFewObservations { .. })
        ));
        let on_sample = NonlinearTriple { tc: 7.0, ..nl };
        assert!(matches!(
            subordinate_linear(&on_sample, &times, &[1.0; 20]),
            Err(FitError::SingularTc { .. })
        ));
        // omega = 0 makes the sine column vanish
        let flat = NonlinearTriple { omega: 0.0, ..nl };
        assert!(matches!(
            subordinate_linear(&flat, &times, &[1.0; 20]),
            Err(FitError::RankDeficient { .. })
        ));
    }

    #[test]
    fn linear_solve_beats_random_amplitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let p = truth();
        let mut prob = synthetic_problem(&p, 300);
        prob.logp
            .iter_mut()
            .for_each(|y| *y += noise.sample(&mut rng));
        let nl = NonlinearTriple {
            tc: 350.0,
            alpha: 0.6,
            omega: 9.0,
        };
        let (_, cost) = subordinate_linear(&nl, &prob.times, &prob.logp).unwrap();
        for _ in 0..100 {
            let lq = LinearQuad {
                a: rng.random_range(0.0..10.0),
                b: rng.random_range(-1.0..1.0),
                c1: rng.random_range(-0.1..0.1),
                c2: rng.random_range(-0.1..0.1),
            };
            let other: f64 = prob
                .times
                .iter()
                .zip(&prob.logp)
                .map(|(&t, &y)| {
                    let r = y - crate::lppl::evaluate_linearized(&nl, &lq, t).unwrap();
                    r * r
                })
                .sum();
            assert!(cost <= other);
        }
    }

    #[test]
    fn refine_from_truth_stays_at_optimum() {
        let p = truth();
        let prob = synthetic_problem(&p, 500);
        let r = local_refine(&p.nonlinear(), &prob, &FitConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.cost <= 1e-15 * 500.0, "cost {}", r.cost);
    }

    #[test]
    fn refine_from_perturbed_start_recovers_truth() {
        let p = truth();
        let prob = synthetic_problem(&p, 500);
        let start = NonlinearTriple {
            tc: p.tc * 1.05,
            alpha: p.alpha * 0.95,
            omega: p.omega * 1.05,
        };
        let (r, trace) = local_refine_traced(&start, &prob, &FitConfig::default()).unwrap();
        assert!((r.params.tc - p.tc).abs() < 0.5, "tc {}", r.params.tc);
        assert!((r.params.alpha - p.alpha).abs() < 1e-2);
        assert!((r.params.omega - p.omega).abs() < 1e-2);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(*trace.last().unwrap() <= trace[0]);
    }

    #[test]
    fn refine_cost_is_monotone_on_noisy_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let p = truth();
        let mut prob = synthetic_problem(&p, 400);
        prob.logp
            .iter_mut()
            .for_each(|y| *y += noise.sample(&mut rng));
        let config = FitConfig::default();
        for start in start_points(prob.window, &config).iter().take(12) {
            let (r, trace) = local_refine_traced(start, &prob, &config).unwrap();
            assert!(trace.windows(2).all(|w| w[1] <= w[0]));
            let start_cost = subordinate_linear(start, &prob.times, &prob.logp)
                .unwrap()
                .1;
            assert!(r.cost <= start_cost);
        }
    }

    #[test]
    fn refine_with_tc_inside_window_is_an_error() {
        let times: Vec<f64> = (0..8).map(|i| i as f64 * 7.0).collect();
        let logp: Vec<f64> = times.iter().map(|t| 1.0 + 0.01 * t).collect();
        let prob = FitProblem::new(times, logp, (0, 49)).unwrap();
        let start = NonlinearTriple {
            tc: 21.0,
            alpha: 0.5,
            omega: 6.0,
        };
        assert!(local_refine(&start, &prob, &FitConfig::default()).is_err());
    }

    #[test]
    fn start_grid_layout() {
        let config = FitConfig::default();
        let starts = start_points((0, 500), &config);
        assert_eq!(starts.len(), 48);
        assert_eq!(starts[0].tc, 510.0);
        assert_eq!((starts[0].alpha, starts[0].omega), (0.2, 5.0));
        let small = FitConfig {
            tc_grid: vec![0.1],
            alpha_starts: vec![0.5],
            omega_starts: vec![8.0],
            n_starts: 6,
            ..config.clone()
        };
        let starts = start_points((0, 500), &small);
        assert_eq!(starts.len(), 6);
        let bounds = SearchBounds::for_window((0, 500), &small);
        assert!(starts.iter().all(|s| bounds.contains(s)));
        assert_eq!(starts, start_points((0, 500), &small));
    }

    #[test]
    fn multistart_recovers_planted_bubble() {
        let p = truth();
        let prob = synthetic_problem(&p, 500);
        let sub = series_from_logp(&prob.times, &prob.logp);
        let r = multistart_fit(&sub, &FitConfig::default()).unwrap();
        assert!((r.params.tc - p.tc).abs() <= 1.0, "tc {}", r.params.tc);
        assert!((r.params.alpha - p.alpha).abs() <= 1e-2);
        assert!((r.params.omega - p.omega).abs() <= 1e-1);
        assert!(r.converged && r.qualified);
        assert_eq!(r.window, (0, 499));
        assert_eq!(r.n_points, 500);
        assert!((r.rmse - (r.cost / 500.0).sqrt()).abs() < 1e-18);
    }

    #[test]
    fn multistart_is_deterministic_and_beats_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let p = truth();
        let mut prob = synthetic_problem(&p, 300);
        prob.logp
            .iter_mut()
            .for_each(|y| *y += noise.sample(&mut rng));
        let config = FitConfig {
            seed: 99,
            n_starts: 60,
            ..FitConfig::default()
        };
        let a = multistart_fit_problem(&prob, &config).unwrap();
        let b = multistart_fit_problem(&prob, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
        let best_grid = start_points(prob.window, &config)
            .iter()
            .take(48)
            .filter_map(|s| subordinate_linear(s, &prob.times, &prob.logp).ok())
            .map(|x| x.1)
            .fold(f64::INFINITY, f64::min);
        assert!(a.cost <= best_grid);
    }

    #[test]
    fn exponential_growth_is_not_a_bubble() {
        let times: Vec<f64> = (0..300).map(|i| i as f64).collect();
        let logp: Vec<f64> = times.iter().map(|t| 3.0 + 0.002 * t).collect();
        let sub = series_from_logp(&times, &logp);
        let r = multistart_fit(&sub, &FitConfig::default()).unwrap();
        assert!(!r.qualified || r.params.c.abs() < 1e-6, "{r:?}");
        assert!(!r.qualified, "{r:?}");
    }

    #[test]
    fn constant_series_is_not_a_bubble() {
        let times: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let sub = series_from_logp(&times, &vec![2.0; 100]);
        let r = multistart_fit(&sub, &FitConfig::default()).unwrap();
        assert!(!r.qualified);
        assert_eq!(r.params.b, 0.0);
    }

    #[test]
    fn too_few_observations() {
        let times: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let sub = series_from_logp(&times, &[1.0; 10]);
        assert!(matches!(
            multistart_fit(&sub, &FitConfig::default()),
            Err(FitError::TooFewObservations { need: 30, got: 10 })
        ));
    }

    #[test]
    fn qualify_examples() {
        let t2 = 400i64;
        let fit = |b: f64, tc: f64| FitResult {
            params: LpplParams {
                a: 1.0,
                b,
                c: 0.01,
                alpha: 0.5,
                omega: 8.0,
                phi: 0.0,
                tc,
            },
            cost: 0.1,
            rmse: 0.01,
            window: (100, t2),
            n_points: 300,
            converged: true,
            qualified: false,
        };
        let f = QualificationFilter::default();
        assert!(qualify(&fit(-0.2, t2 as f64 + 30.0), &f));
        assert!(!qualify(&fit(0.1, t2 as f64 + 30.0), &f));
        assert!(!qualify(&fit(-0.2, t2 as f64 - 5.0), &f));
    }
}
