//! Artifact writers: trace CSV, per-point report JSON, observables CSV.
//!
//! CSV bodies are the determinism contract: identical configuration must
//! yield bit-identical bytes, so all float formatting is pinned here
//! (`{:.16e}`: 17 significant digits, round-trip exact for f64).

use crate::backend::{Backend, PointOutcome};
use crate::config::{Invocation, Point};
use anyhow::{bail, Context, Result};
use serde::Serialize;
use spinprobe_core::analysis::{
    estimate_frequency, estimate_recoherence_time, RecoherenceConfig,
};
use spinprobe_core::trace::{CoherenceTrace, TraceMeta};
use spinprobe_core::C64;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Stable file-name fragment for a parameter point.
pub fn point_tag(backend: Backend, point: &Point) -> String {
    format!("{}_d{:.4}_L{}_g{:.4}", backend.as_str(), point.delta, point.l, point.g)
}

/// Writes `t,re_rho01,im_rho01,abs_rho01` with pinned float formatting.
pub fn write_trace_csv(path: &Path, trace: &CoherenceTrace) -> Result<()> {
    let mut body = String::with_capacity(80 * trace.len() + 40);
    body.push_str("t,re_rho01,im_rho01,abs_rho01\n");
    for (t, v) in trace.times().iter().zip(trace.values()) {
        body.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            t,
            v.re,
            v.im,
            v.norm()
        ));
    }
    std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
}

/// Reads a trace CSV back (used by `compare`).
pub fn read_trace_csv(path: &Path) -> Result<CoherenceTrace> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("t,re_rho01,im_rho01,abs_rho01") => {}
        other => bail!(
            "{}: unexpected header {:?}",
            path.display(),
            other.unwrap_or("<empty>")
        ),
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            bail!("{} line {}: expected 4 columns, got {}", path.display(), idx + 2, cols.len());
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().with_context(|| {
                format!("{} line {}: bad float `{s}`", path.display(), idx + 2)
            })
        };
        times.push(parse(cols[0])?);
        values.push(C64::new(parse(cols[1])?, parse(cols[2])?));
    }
    if times.len() < 2 {
        bail!("{}: fewer than two samples", path.display());
    }
    let meta = TraceMeta::new("csv", None);
    Ok(CoherenceTrace::from_samples(times, values, meta))
}

/// Per-point observables and provenance, serialized as `report_<tag>.json`.
#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub backend: Backend,
    pub delta: f64,
    pub l: usize,
    pub g: f64,
    pub j: f64,
    pub h_z: f64,
    pub t_max: f64,
    pub dt: f64,
    /// First revival time of `|rho01|`, if one is detected.
    pub t_r: Option<f64>,
    /// Dominant oscillation frequency after the transient, if resolvable.
    pub omega: Option<f64>,
    /// Ground-state middle-bond entanglement entropy, where defined.
    pub entropy: Option<f64>,
    pub trace_file: String,
    pub elapsed_s: f64,
    pub notes: Vec<String>,
}

/// Extracts the observables and assembles the report for one finished point.
pub fn build_report(
    inv: &Invocation,
    point: &Point,
    outcome: &PointOutcome,
    trace_file: &str,
    elapsed_s: f64,
) -> PointReport {
    let peak_cfg = RecoherenceConfig { prominence: inv.prominence, ..RecoherenceConfig::default() };
    let mut notes = outcome.trace.meta.notes.clone();
    notes.extend(outcome.extra_notes.iter().cloned());
    PointReport {
        backend: inv.backend,
        delta: point.delta,
        l: point.l,
        g: point.g,
        j: inv.j,
        h_z: inv.h_z,
        t_max: inv.t_max,
        dt: inv.dt,
        t_r: estimate_recoherence_time(&outcome.trace, &peak_cfg),
        omega: estimate_frequency(&outcome.trace, inv.transient),
        entropy: outcome.entropy,
        trace_file: trace_file.to_string(),
        elapsed_s,
        notes,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("JSON serialization failed")?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes the sweep aggregate `observables.csv` (`delta,t_r,omega,entropy`);
/// absent observables become empty fields.
pub fn write_observables_csv(path: &Path, rows: &[PointReport]) -> Result<()> {
    let fmt = |v: Option<f64>| -> String {
        v.map(|x| format!("{x:.16e}")).unwrap_or_default()
    };
    let mut body = String::from("delta,t_r,omega,entropy\n");
    for r in rows {
        body.push_str(&format!(
            "{:.16e},{},{},{}\n",
            r.delta,
            fmt(r.t_r),
            fmt(r.omega),
            fmt(r.entropy)
        ));
    }
    std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
}

/// Top-level run/sweep manifest: full resolved configuration plus
/// per-point convergence diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub code_version: String,
    pub config: Invocation,
    pub wall_time_s: f64,
    pub points: Vec<ManifestPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestPoint {
    pub tag: String,
    pub delta: f64,
    pub l: usize,
    pub g: f64,
    pub trace_file: String,
    pub report_file: String,
    pub elapsed_s: f64,
    pub notes: Vec<String>,
}

pub fn code_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Append-only progress log shared by sweep workers.
pub struct ProgressLog {
    file: std::sync::Mutex<std::fs::File>,
}

impl ProgressLog {
    pub fn create(path: &Path) -> Result<Self> {
        let file = std::fs::File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        Ok(Self { file: std::sync::Mutex::new(file) })
    }

    pub fn record(&self, line: &str) {
        if let Ok(mut f) = self.file.lock() {
            let _ = writeln!(f, "{line}");
        }
    }
}

/// Output file paths of one point inside a run directory.
pub struct PointPaths {
    pub trace: PathBuf,
    pub report: PathBuf,
    pub tag: String,
}

pub fn point_paths(dir: &Path, backend: Backend, point: &Point) -> PointPaths {
    let tag = point_tag(backend, point);
    PointPaths {
        trace: dir.join(format!("coherence_{tag}.csv")),
        report: dir.join(format!("report_{tag}.json")),
        tag,
    }
}
