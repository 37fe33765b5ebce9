//! Sweep orchestration: a work-stealing pool over independent parameter
//! points, each writing only its own files.

use crate::backend::execute_point;
use crate::config::Invocation;
use crate::output::{
    build_report, code_version, point_paths, write_json, write_observables_csv, write_trace_csv,
    Manifest, ManifestPoint, PointReport, ProgressLog,
};
use anyhow::{Context, Result};
use rayon::prelude::*;
use std::time::Instant;

/// All artifacts of a finished invocation, in point order.
pub struct SweepOutput {
    pub reports: Vec<PointReport>,
    pub manifest: Manifest,
}

/// Executes every parameter point and writes per-point artifacts plus the
/// manifest; `with_observables` adds the sweep aggregate CSV.
///
/// Gating runs first: no computation starts if any point is invalid.
pub fn run_points(inv: &Invocation, command: &str, with_observables: bool) -> Result<SweepOutput> {
    inv.gate()?;
    std::fs::create_dir_all(&inv.out_dir)
        .with_context(|| format!("cannot create {}", inv.out_dir.display()))?;
    let log = ProgressLog::create(&inv.out_dir.join("progress.log"))?;
    let points = inv.points();
    let started = Instant::now();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(inv.workers)
        .build()
        .context("cannot build worker pool")?;
    let results: Vec<Result<(PointReport, ManifestPoint)>> = pool.install(|| {
        points
            .par_iter()
            .map(|point| {
                let t0 = Instant::now();
                let paths = point_paths(&inv.out_dir, inv.backend, point);
                let outcome = execute_point(inv, point).with_context(|| {
                    format!("point delta={}, L={}, g={}", point.delta, point.l, point.g)
                })?;
                write_trace_csv(&paths.trace, &outcome.trace)?;
                let trace_name = paths
                    .trace
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let elapsed = t0.elapsed().as_secs_f64();
                let report = build_report(inv, point, &outcome, &trace_name, elapsed);
                write_json(&paths.report, &report)?;
                log.record(&format!("done {} in {:.2} s", paths.tag, elapsed));
                let manifest_point = ManifestPoint {
                    tag: paths.tag.clone(),
                    delta: point.delta,
                    l: point.l,
                    g: point.g,
                    trace_file: trace_name,
                    report_file: paths
                        .report
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    elapsed_s: elapsed,
                    notes: report.notes.clone(),
                };
                Ok((report, manifest_point))
            })
            .collect()
    });

    let mut reports = Vec::with_capacity(results.len());
    let mut manifest_points = Vec::with_capacity(results.len());
    for r in results {
        let (report, mp) = r?;
        reports.push(report);
        manifest_points.push(mp);
    }

    if with_observables {
        write_observables_csv(&inv.out_dir.join("observables.csv"), &reports)?;
    }
    let manifest = Manifest {
        command: command.to_string(),
        code_version: code_version(),
        config: inv.clone(),
        wall_time_s: started.elapsed().as_secs_f64(),
        points: manifest_points,
    };
    write_json(&inv.out_dir.join("manifest.json"), &manifest)?;
    Ok(SweepOutput { reports, manifest })
}
