//! Reproducibility check: a sweep must produce byte-identical data files
//! regardless of how many worker threads execute it.

use crate::backend::Backend;
use crate::config::{InitialChoice, Invocation};
use crate::sweep::run_points;
use anyhow::{Context, Result};
use spinprobe_core::verify::CriterionReport;
use std::path::{Path, PathBuf};
use std::time::Instant;

fn sweep_invocation(workers: usize, out_dir: PathBuf) -> Invocation {
    Invocation {
        backend: Backend::Exact,
        j: 1.0,
        h_z: 0.0,
        deltas: vec![0.0, 0.5, 1.0],
        ls: vec![8],
        gs: vec![0.25],
        t_max: 5.0,
        dt: 0.05,
        initial: InitialChoice::Auto,
        chi_max: 64,
        cutoff: 1e-10,
        max_sweeps: 40,
        krylov_tol: 1e-10,
        transient: 1.0,
        prominence: 0.05,
        seed: 0x5eed,
        workers,
        paper_scale: false,
        out_dir,
    }
}

/// Data files of one sweep directory, sorted by name: every trace plus the
/// aggregated observables table. Logs and the manifest (wall times) are
/// intentionally excluded.
fn data_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| (n.starts_with("coherence_") && n.ends_with(".csv")) || n == "observables.csv")
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let bytes = std::fs::read(dir.join(&n))
                .with_context(|| format!("cannot read {n}"))?;
            Ok((n, bytes))
        })
        .collect()
}

/// Runs the same small sweep with 1 and 8 workers and demands byte-identical
/// trace and observable files.
pub fn criterion_12() -> CriterionReport {
    let start = Instant::now();
    let base = std::env::temp_dir().join(format!(
        "spinprobe-determinism-{}-{}",
        std::process::id(),
        start.elapsed().subsec_nanos()
    ));
    let outcome = (|| -> Result<(bool, String)> {
        let dir_1 = base.join("workers-1");
        let dir_8 = base.join("workers-8");
        run_points(&sweep_invocation(1, dir_1.clone()), "sweep", true)?;
        run_points(&sweep_invocation(8, dir_8.clone()), "sweep", true)?;
        let files_1 = data_files(&dir_1)?;
        let files_8 = data_files(&dir_8)?;
        let names_1: Vec<&String> = files_1.iter().map(|(n, _)| n).collect();
        let names_8: Vec<&String> = files_8.iter().map(|(n, _)| n).collect();
        if names_1 != names_8 {
            return Ok((false, format!("file sets differ: {names_1:?} vs {names_8:?}")));
        }
        let mismatched: Vec<&String> = files_1
            .iter()
            .zip(&files_8)
            .filter(|((_, a), (_, b))| a != b)
            .map(|((n, _), _)| n)
            .collect();
        if mismatched.is_empty() {
            Ok((true, format!("{} files byte-identical across 1 and 8 workers", files_1.len())))
        } else {
            Ok((false, format!("byte differences in {mismatched:?}")))
        }
    })();
    let _ = std::fs::remove_dir_all(&base);
    let (passed, details) = match outcome {
        Ok(pair) => pair,
        Err(e) => (false, format!("error: {e:#}")),
    };
    CriterionReport {
        id: "c12".into(),
        label: "parallel sweep determinism".into(),
        passed,
        details,
        seconds: start.elapsed().as_secs_f64(),
    }
}
