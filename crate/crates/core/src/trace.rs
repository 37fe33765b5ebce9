//! Time-series containers shared by every backend.
//!
//! All solvers in this crate produce either a qubit coherence `rho01(t)` or a
//! probed-spin autocorrelation `C(t)` sampled on a uniform time grid starting
//! at `t = 0`.  The containers keep the sampled values together with enough
//! metadata (backend label, parameters, free-form notes) for reports and
//! cross-backend comparisons.

use crate::model::ModelParams;
use crate::C64;
use thiserror::Error;

/// Errors from time-grid construction.
#[derive(Debug, Error)]
pub enum GridError {
    #[error("time step must be positive and finite, got dt = {0}")]
    InvalidStep(f64),
    #[error("horizon must satisfy t_max >= dt, got t_max = {t_max}, dt = {dt}")]
    HorizonTooShort { t_max: f64, dt: f64 },
}

/// Uniform time grid `t_i = i * dt` for `i = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Grid covering `[0, t_max]` with step `dt`; `t_max` is rounded to the
    /// nearest multiple of `dt`.
    pub fn new(t_max: f64, dt: f64) -> Result<Self, GridError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(GridError::InvalidStep(dt));
        }
        if !(t_max.is_finite() && t_max >= dt) {
            return Err(GridError::HorizonTooShort { t_max, dt });
        }
        let n_steps = (t_max / dt).round() as usize;
        Ok(Self { dt, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps; the grid has `n_steps + 1` sample points.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| i as f64 * self.dt).collect()
    }
}

/// Descriptive metadata attached to a sampled trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMeta {
    /// Which solver produced the trace (e.g. `"exact"`, `"tdvp"`).
    pub backend: String,
    /// Physical parameters of the run, when applicable.
    pub params: Option<ModelParams>,
    /// Free-form diagnostics (convergence numbers, conventions used, ...).
    pub notes: Vec<String>,
}

impl TraceMeta {
    pub fn new(backend: &str, params: Option<ModelParams>) -> Self {
        Self { backend: backend.to_string(), params, notes: Vec::new() }
    }
}

/// A complex time series on a uniform grid (used for both `rho01` and `C`).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTrace {
    times: Vec<f64>,
    values: Vec<C64>,
    pub meta: TraceMeta,
}

/// Qubit coherence `rho01(t)`.
pub type CoherenceTrace = ComplexTrace;
/// Probed-spin autocorrelation `C(t) = <Sz_M(t) Sz_M(0)>` for `t >= 0`.
pub type CorrelationTrace = ComplexTrace;

impl ComplexTrace {
    /// Builds a trace on `grid`; `values.len()` must equal `grid.len()`.
    pub fn from_grid(grid: &TimeGrid, values: Vec<C64>, meta: TraceMeta) -> Self {
        assert_eq!(values.len(), grid.len(), "value count must match the grid");
        Self { times: grid.times(), values, meta }
    }

    /// Builds a trace from explicit samples (used by file readers).
    ///
    /// # Panics
    /// If lengths differ or fewer than two samples are given.
    pub fn from_samples(times: Vec<f64>, values: Vec<C64>, meta: TraceMeta) -> Self {
        assert_eq!(times.len(), values.len(), "times/values length mismatch");
        assert!(times.len() >= 2, "a trace needs at least two samples");
        Self { times, values, meta }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Mutable sample access, e.g. for applying a global phase in place.
    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn value_at_start(&self) -> C64 {
        self.values[0]
    }

    /// `|value|` at every sample.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Returns the uniform step when the grid is uniform within `rel_tol`.
    pub fn uniform_step(&self, rel_tol: f64) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let dt = self.times[1] - self.times[0];
        if !(dt > 0.0 && dt.is_finite()) {
            return None;
        }
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= rel_tol * dt);
        uniform.then_some(dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_horizon_inclusively() {
        let grid = TimeGrid::new(1.0, 0.25).unwrap();
        assert_eq!(grid.n_steps(), 4);
        assert_eq!(grid.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn grid_rejects_bad_steps() {
        assert!(TimeGrid::new(1.0, 0.0).is_err());
        assert!(TimeGrid::new(1.0, -0.1).is_err());
        assert!(TimeGrid::new(0.0, 0.1).is_err());
        assert!(TimeGrid::new(f64::INFINITY, 0.1).is_err());
    }

    #[test]
    fn uniform_step_detection() {
        let grid = TimeGrid::new(1.0, 0.5).unwrap();
        let trace = ComplexTrace::from_grid(
            &grid,
            vec![C64::new(1.0, 0.0); 3],
            TraceMeta::default(),
        );
        assert_eq!(trace.uniform_step(1e-9), Some(0.5));

        let skewed = ComplexTrace::from_samples(
            vec![0.0, 0.5, 1.2],
            vec![C64::new(1.0, 0.0); 3],
            TraceMeta::default(),
        );
        assert_eq!(skewed.uniform_step(1e-9), None);
    }
}
