//! Second-order time-convolutionless (TCL) coherence from a correlator.
//!
//! Given the two-time correlator `C(t) = <Sz_M(t) Sz_M(0)>` of the probed
//! spin, the second-order time-local master equation integrates to
//!
//! ```text
//! rho01(t) = rho01(0) * exp(-Gamma(t)),
//! Gamma(t) = (g^2/2) * Integral_0^t A(tau) dtau,
//! A(tau)   = Integral_{-tau}^{tau} C(t') dt' = 2 * Integral_0^tau Re C(t') dt',
//! ```
//!
//! where the second form uses the conjugate symmetry `C(-t) = conj C(t)` of a
//! stationary-state correlator.  Both integrals are cumulative trapezoids on
//! the correlator's own grid; the spectral content of `C` is bounded by the
//! chain bandwidth, so a uniform grid at the propagation step is enough.

use crate::trace::{CoherenceTrace, CorrelationTrace, TraceMeta};
use crate::C64;
use thiserror::Error;

/// Errors from the TCL integrator.
#[derive(Debug, Error)]
pub enum TclError {
    #[error("correlator grid is not uniform (or has fewer than two samples)")]
    NonUniformGrid,
    #[error("averaging window {window} exceeds the trace horizon {t_max}")]
    WindowTooLong { window: f64, t_max: f64 },
    #[error("averaging window must be positive, got {window}")]
    InvalidWindow { window: f64 },
}

/// Output of [`tcl_coherence`]: the coherence plus its building blocks.
#[derive(Debug, Clone)]
pub struct TclResult {
    pub coherence: CoherenceTrace,
    /// Memory integral `A(tau)` on the same grid (units of time).
    pub memory_integral: Vec<f64>,
    /// Decoherence exponent `Gamma(t)`; `rho01 = rho0 * exp(-Gamma)` holds on
    /// every grid point by construction.
    pub exponent: Vec<f64>,
}

/// Cumulative trapezoid of uniformly sampled values, starting at zero.
fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for pair in values.windows(2) {
        acc += 0.5 * dt * (pair[0] + pair[1]);
        out.push(acc);
    }
    out
}

/// Memory integral `A(tau) = 2 * Integral_0^tau Re C dt'` on the trace grid.
fn memory_integral(corr: &CorrelationTrace) -> Result<(Vec<f64>, f64), TclError> {
    let dt = corr.uniform_step(1e-9).ok_or(TclError::NonUniformGrid)?;
    let re: Vec<f64> = corr.values().iter().map(|c| 2.0 * c.re).collect();
    Ok((cumulative_trapezoid(&re, dt), dt))
}

/// Solves the second-order TCL equation for the qubit coherence.
///
/// `corr` must be uniformly sampled from `t = 0`; negative times are folded in
/// analytically through the conjugate symmetry, so only `Re C` contributes.
pub fn tcl_coherence(
    corr: &CorrelationTrace,
    g: f64,
    rho0: C64,
) -> Result<TclResult, TclError> {
    let (a_series, dt) = memory_integral(corr)?;
    let mut exponent = cumulative_trapezoid(&a_series, dt);
    exponent.iter_mut().for_each(|x| *x *= 0.5 * g * g);
    let values: Vec<C64> = exponent.iter().map(|gamma| rho0 * (-gamma).exp()).collect();
    let mut meta = TraceMeta::new("tcl", corr.meta.params);
    meta.notes
        .push(format!("correlator source: {}", corr.meta.backend));
    meta.notes.push(format!("g = {g}"));
    let coherence = CoherenceTrace::from_samples(corr.times().to_vec(), values, meta);
    Ok(TclResult { coherence, memory_integral: a_series, exponent })
}

/// Would-be Markov rate: `A(tau)` averaged over the final `window` of the
/// trace (trapezoid mean).  A memory integral that decays to zero — as at
/// `Delta = 0`, where the Markov limit predicts no decoherence at all — gives
/// a near-zero average, while a frozen spin gives a linearly growing one.
pub fn markov_diagnostic(corr: &CorrelationTrace, window: f64) -> Result<f64, TclError> {
    if !(window > 0.0) {
        return Err(TclError::InvalidWindow { window });
    }
    let (a_series, dt) = memory_integral(corr)?;
    let t_max = corr.times().last().copied().unwrap_or(0.0);
    if window > t_max + 1e-9 * dt {
        return Err(TclError::WindowTooLong { window, t_max });
    }
    let start = corr
        .times()
        .iter()
        .position(|&t| t >= t_max - window - 1e-9 * dt.max(1.0))
        .unwrap_or(0);
    let tail = &a_series[start..];
    if tail.len() < 2 {
        return Ok(*a_series.last().expect("trace is non-empty"));
    }
    let integral: f64 = tail.windows(2).map(|p| 0.5 * dt * (p[0] + p[1])).sum();
    Ok(integral / (dt * (tail.len() - 1) as f64))
}
