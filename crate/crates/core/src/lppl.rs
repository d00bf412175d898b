//! The first-order log-periodic power law
//!
//! ```text
//! ln P(t) = A + B |t - tc|^alpha + C |t - tc|^alpha cos(omega ln|t - tc| + phi)
//! ```
//!
//! together with its linear-in-parameters form, where the cosine term is
//! split as `C1 f cos(omega ln|t - tc|) + C2 f sin(omega ln|t - tc|)` with
//! `C1 = C cos(phi)`, `C2 = -C sin(phi)`. Only `(tc, alpha, omega)` then
//! enter nonlinearly.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::fitter::FitResult;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ModelError {
    #[error("model is singular at t = tc = {tc}")]
    Singular { tc: f64 },
}

/// The seven LPPL parameters. `tc` is a real day offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpplParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub omega: f64,
    pub phi: f64,
    pub tc: f64,
}

/// The parameters searched by the nonlinear optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearTriple {
    pub tc: f64,
    pub alpha: f64,
    pub omega: f64,
}

/// The linear amplitudes `(A, B, C1, C2)` for a fixed [`NonlinearTriple`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearQuad {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
}

impl LpplParams {
    pub fn nonlinear(&self) -> NonlinearTriple {
        NonlinearTriple {
            tc: self.tc,
            alpha: self.alpha,
            omega: self.omega,
        }
    }

    pub fn linear(&self) -> LinearQuad {
        LinearQuad {
            a: self.a,
            b: self.b,
            c1: self.c * self.phi.cos(),
            c2: -self.c * self.phi.sin(),
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<f64, ModelError> {
        evaluate(self, t)
    }
}

/// Basis values `{1, f, f cos(g), f sin(g)}` at `t` with `f = |t - tc|^alpha`
/// and `g = omega ln|t - tc|`.
#[inline]
pub(crate) fn basis(nl: &NonlinearTriple, t: f64) -> Result<[f64; 4], ModelError> {
    let tau = (t - nl.tc).abs();
    if tau == 0.0 {
        return Err(ModelError::Singular { tc: nl.tc });
    }
    let ln_tau = tau.ln();
    let f = (nl.alpha * ln_tau).exp();
    let (s, c) = (nl.omega * ln_tau).sin_cos();
    Ok([1.0, f, f * c, f * s])
}

/// Basis values and their partial derivatives with respect to
/// `(tc, alpha, omega)`; `partials[k][j]` is d basis_j / d theta_k.
#[inline]
pub(crate) fn basis_with_partials(
    nl: &NonlinearTriple,
    t: f64,
) -> Result<([f64; 4], [[f64; 4]; 3]), ModelError> {
    let dt = t - nl.tc;
    let tau = dt.abs();
    if tau == 0.0 {
        return Err(ModelError::Singular { tc: nl.tc });
    }
    let sign = dt.signum();
    let ln_tau = tau.ln();
    let f = (nl.alpha * ln_tau).exp();
    let (sg, cg) = (nl.omega * ln_tau).sin_cos();

    // d tau / d tc = -sign
    let df_dtc = -sign * nl.alpha * f / tau;
    let dg_dtc = -sign * nl.omega / tau;
    let df_dalpha = f * ln_tau;
    let dg_domega = ln_tau;

    let values = [1.0, f, f * cg, f * sg];
    let partials = [
        [
            0.0,
            df_dtc,
            df_dtc * cg - f * sg * dg_dtc,
            df_dtc * sg + f * cg * dg_dtc,
        ],
        [0.0, df_dalpha, df_dalpha * cg, df_dalpha * sg],
        [0.0, 0.0, -f * sg * dg_domega, f * cg * dg_domega],
    ];
    Ok((values, partials))
}

pub fn evaluate(params: &LpplParams, t: f64) -> Result<f64, ModelError> {
    let tau = (t - params.tc).abs();
    if tau == 0.0 {
        return Err(ModelError::Singular { tc: params.tc });
    }
    let ln_tau = tau.ln();
    let f = (params.alpha * ln_tau).exp();
    Ok(params.a + params.b * f + params.c * f * (params.omega * ln_tau + params.phi).cos())
}

pub fn evaluate_linearized(
    nl: &NonlinearTriple,
    lq: &LinearQuad,
    t: f64,
) -> Result<f64, ModelError> {
    let [one, f, fc, fs] = basis(nl, t)?;
    Ok(lq.a * one + lq.b * f + lq.c1 * fc + lq.c2 * fs)
}

/// Analytic gradient of [`evaluate`] with respect to `(tc, alpha, omega)`,
/// holding `A, B, C, phi` fixed.
pub fn nonlinear_gradient(params: &LpplParams, t: f64) -> Result<[f64; 3], ModelError> {
    let dt = t - params.tc;
    let tau = dt.abs();
    if tau == 0.0 {
        return Err(ModelError::Singular { tc: params.tc });
    }
    let sign = dt.signum();
    let ln_tau = tau.ln();
    let f = (params.alpha * ln_tau).exp();
    let (s, c) = (params.omega * ln_tau + params.phi).sin_cos();
    let amp = params.b + params.c * c;
    let d_tc = -sign * f / tau * (params.alpha * amp - params.c * params.omega * s);
    let d_alpha = f * ln_tau * amp;
    let d_omega = -params.c * f * s * ln_tau;
    Ok([d_tc, d_alpha, d_omega])
}

/// Folds `(C1, C2)` back into amplitude and phase, `phi` in `[0, 2 pi)`.
pub fn to_canonical(nl: &NonlinearTriple, lq: &LinearQuad) -> LpplParams {
    let c = lq.c1.hypot(lq.c2);
    let phi = if c == 0.0 {
        0.0
    } else {
        let raw = (-lq.c2).atan2(lq.c1).rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative angles
        if raw >= TAU {
            0.0
        } else {
            raw
        }
    };
    LpplParams {
        a: lq.a,
        b: lq.b,
        c,
        alpha: nl.alpha,
        omega: nl.omega,
        phi,
        tc: nl.tc,
    }
}

/// Parameter ranges a fit must fall in to count as a bubble signature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualificationFilter {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub require_b_negative: bool,
    pub tc_after_t2: bool,
    /// Days beyond `t2` within which `tc` must fall.
    pub tc_max_horizon: f64,
}

impl Default for QualificationFilter {
    fn default() -> Self {
        Self {
            alpha_min: 0.1,
            alpha_max: 0.9,
            omega_min: 2.0,
            omega_max: 25.0,
            require_b_negative: true,
            tc_after_t2: true,
            tc_max_horizon: 365.0,
        }
    }
}

impl QualificationFilter {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha_min < self.alpha_max) {
            return Err(format!(
                "alpha_min ({}) must be < alpha_max ({})",
                self.alpha_min, self.alpha_max
            ));
        }
        if !(self.omega_min < self.omega_max) {
            return Err(format!(
                "omega_min ({}) must be < omega_max ({})",
                self.omega_min, self.omega_max
            ));
        }
        if !(self.tc_max_horizon > 0.0) {
            return Err(format!(
                "tc_max_horizon ({}) must be > 0",
                self.tc_max_horizon
            ));
        }
        Ok(())
    }

    pub fn accepts(&self, params: &LpplParams, t2: f64) -> bool {
        let alpha_ok = params.alpha >= self.alpha_min && params.alpha <= self.alpha_max;
        let omega_ok = params.omega >= self.omega_min && params.omega <= self.omega_max;
        let b_ok = !self.require_b_negative || params.b < 0.0;
        let tc_ok = !self.tc_after_t2 || (params.tc > t2 && params.tc <= t2 + self.tc_max_horizon);
        alpha_ok && omega_ok && b_ok && tc_ok
    }
}

pub fn qualify(fit: &FitResult, filter: &QualificationFilter) -> bool {
    filter.accepts(&fit.params, fit.window.1 as f64)
}
