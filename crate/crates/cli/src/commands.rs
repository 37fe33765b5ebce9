//! Subcommand implementations.

use crate::config::{resolve, CommonOpts};
use crate::output::{read_trace_csv, write_json};
use crate::sweep::run_points;
use anyhow::{bail, Context, Result};
use serde::Serialize;
use spinprobe_core::analysis::compare_traces;
use spinprobe_core::exact::{entanglement_entropy_dense, ground_state_exact, ExactConfig};
use spinprobe_core::model::ModelParams;
use spinprobe_core::mps::{ground_state_mps, DmrgConfig};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// `run`: a single parameter point; trace + report + manifest.
pub fn run_cmd(opts: &CommonOpts) -> Result<()> {
    let inv = resolve(opts)?;
    if !inv.is_single_point() {
        bail!(
            "`run` takes a single value per axis (got {} delta x {} L x {} g values); \
             use `sweep` for multi-valued axes",
            inv.deltas.len(),
            inv.ls.len(),
            inv.gs.len()
        );
    }
    let out = run_points(&inv, "run", false)?;
    let r = &out.reports[0];
    println!(
        "run complete: backend={} delta={} L={} g={} -> {}",
        r.backend, r.delta, r.l, r.g, inv.out_dir.join(&r.trace_file).display()
    );
    print_observables(r);
    Ok(())
}

/// `sweep`: the full axis product; per-point artifacts + observables.csv.
pub fn sweep_cmd(opts: &CommonOpts) -> Result<()> {
    let inv = resolve(opts)?;
    let out = run_points(&inv, "sweep", true)?;
    println!(
        "sweep complete: {} points with {} workers in {:.1} s -> {}",
        out.reports.len(),
        inv.workers,
        out.manifest.wall_time_s,
        inv.out_dir.display()
    );
    for r in &out.reports {
        print!("  delta={:>8} L={:<4} g={:<6}", r.delta, r.l, r.g);
        print_observables(r);
    }
    Ok(())
}

fn print_observables(r: &crate::output::PointReport) {
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    println!(
        "  t_r={} omega={} entropy={}",
        fmt(r.t_r),
        fmt(r.omega),
        fmt(r.entropy)
    );
}

#[derive(Debug, Serialize)]
pub struct CompareEntry {
    pub file: String,
    pub max_abs: f64,
    pub rms: f64,
    pub first_divergence: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct CompareSummary {
    pub dir_a: PathBuf,
    pub dir_b: PathBuf,
    pub divergence_threshold: f64,
    pub max_abs_overall: f64,
    pub entries: Vec<CompareEntry>,
}

/// Pairs up equally named trace files of two run directories and measures
/// their pointwise deviations.
pub fn compare_dirs(dir_a: &Path, dir_b: &Path, threshold: f64) -> Result<CompareSummary> {
    let list = |dir: &Path| -> Result<BTreeSet<String>> {
        let mut names = BTreeSet::new();
        for entry in std::fs::read_dir(dir)
            .with_context(|| format!("cannot list {}", dir.display()))?
        {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if name.starts_with("coherence_") && name.ends_with(".csv") {
                names.insert(name);
            }
        }
        if names.is_empty() {
            bail!("{} contains no coherence_*.csv traces", dir.display());
        }
        Ok(names)
    };
    let (names_a, names_b) = (list(dir_a)?, list(dir_b)?);
    if names_a != names_b {
        let only_a: Vec<_> = names_a.difference(&names_b).cloned().collect();
        let only_b: Vec<_> = names_b.difference(&names_a).cloned().collect();
        bail!(
            "trace sets differ: only in {}: [{}]; only in {}: [{}]",
            dir_a.display(),
            only_a.join(", "),
            dir_b.display(),
            only_b.join(", ")
        );
    }
    let mut entries = Vec::with_capacity(names_a.len());
    let mut max_abs_overall = 0.0f64;
    for name in &names_a {
        let ta = read_trace_csv(&dir_a.join(name))?;
        let tb = read_trace_csv(&dir_b.join(name))?;
        let dev = compare_traces(&ta, &tb, threshold)
            .with_context(|| format!("comparing {name}"))?;
        max_abs_overall = max_abs_overall.max(dev.max_abs);
        entries.push(CompareEntry {
            file: name.clone(),
            max_abs: dev.max_abs,
            rms: dev.rms,
            first_divergence: dev.first_divergence,
        });
    }
    Ok(CompareSummary {
        dir_a: dir_a.to_path_buf(),
        dir_b: dir_b.to_path_buf(),
        divergence_threshold: threshold,
        max_abs_overall,
        entries,
    })
}

/// `compare`: emit the metrics file and a per-trace summary.
pub fn compare_cmd(dir_a: &Path, dir_b: &Path, out: &Path, threshold: f64) -> Result<()> {
    let summary = compare_dirs(dir_a, dir_b, threshold)?;
    write_json(out, &summary)?;
    for e in &summary.entries {
        println!("  {}: max |dev| = {:.3e}, rms = {:.3e}", e.file, e.max_abs, e.rms);
    }
    println!(
        "compare complete: {} traces, overall max |dev| = {:.3e} -> {}",
        summary.entries.len(),
        summary.max_abs_overall,
        out.display()
    );
    Ok(())
}

/// `verify`: the cross-backend criteria battery; returns overall success.
pub fn verify_cmd(slow: bool) -> bool {
    use spinprobe_core::verify as v;
    type Check = fn() -> spinprobe_core::verify::CriterionReport;
    let mut checks: Vec<Check> = vec![
        v::criterion_1,
        v::criterion_2,
        v::criterion_3,
        v::criterion_4a,
        v::criterion_4b,
    ];
    if slow {
        checks.push(v::criterion_4c);
    }
    checks.extend([
        v::criterion_5 as Check,
        v::criterion_6,
        v::criterion_7,
        v::criterion_8,
        v::criterion_9,
        v::criterion_10,
        v::criterion_11,
        crate::determinism::criterion_12,
    ]);
    let mut all_pass = true;
    for check in checks {
        let report = check();
        println!("{}", report.line());
        all_pass &= report.passed;
    }
    all_pass
}

/// Method selector for `ground`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GroundMethod {
    /// Dense/Krylov diagonalization up to L = 14, DMRG beyond.
    Auto,
    /// Force the state-vector solver.
    Exact,
    /// Force the variational tensor-network solver.
    Dmrg,
}

#[derive(Debug, clap::Args)]
pub struct GroundOpts {
    #[arg(long, value_enum, default_value = "auto")]
    pub method: GroundMethod,
    /// Chain length (even).
    #[arg(long = "L")]
    pub l: Option<usize>,
    /// Anisotropy.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Exchange coupling J (> 0).
    #[arg(long)]
    pub j: Option<f64>,
    /// Restrict the search to a total-magnetization sector (2*Sz).
    #[arg(long, allow_hyphen_values = true)]
    pub sector: Option<i32>,
    /// Bond-dimension cap (DMRG).
    #[arg(long = "chi-max")]
    pub chi_max: Option<usize>,
    /// Truncation budget per bond (DMRG).
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Seed for deterministic eigensolver starts.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the production-scale default length (L = 100).
    #[arg(long = "paper-scale")]
    pub paper_scale: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct GroundReport {
    pub method: String,
    pub l: usize,
    pub delta: f64,
    pub j: f64,
    pub sector: Option<i32>,
    pub energy: f64,
    pub two_sz: Option<i32>,
    pub sweeps: Option<usize>,
    pub max_bond_dim: Option<usize>,
    pub entropy: f64,
    pub notes: Vec<String>,
}

/// `ground`: ground-state energy and middle-bond entropy only.
pub fn ground_cmd(opts: &GroundOpts) -> Result<()> {
    let l = opts.l.unwrap_or(if opts.paper_scale { 100 } else { 48 });
    let delta = opts.delta.unwrap_or(1.0);
    let j = opts.j.unwrap_or(1.0);
    let params = ModelParams::new(j, delta, l, 0.25, 0.0)?;
    let use_exact = match opts.method {
        GroundMethod::Exact => {
            if l > 14 {
                bail!("the state-vector solver is limited to L <= 14, got L = {l}");
            }
            true
        }
        GroundMethod::Dmrg => false,
        GroundMethod::Auto => l <= 14,
    };
    let report = if use_exact {
        let cfg = ExactConfig { seed: opts.seed.unwrap_or(0x5eed), ..ExactConfig::default() };
        let gs = ground_state_exact(&params, opts.sector, &cfg)?;
        let entropy = entanglement_entropy_dense(&gs.state, l / 2)?;
        GroundReport {
            method: "exact".into(),
            l,
            delta,
            j,
            sector: opts.sector,
            energy: gs.energy,
            two_sz: Some(gs.two_sz),
            sweeps: None,
            max_bond_dim: None,
            entropy,
            notes: match gs.gap_in_sector {
                Some(gap) => vec![format!("in-sector gap {gap:.6e}")],
                None => Vec::new(),
            },
        }
    } else {
        let cfg = DmrgConfig {
            chi_max: opts.chi_max.unwrap_or(128),
            cutoff: opts.cutoff.unwrap_or(1e-10),
            ..DmrgConfig::default()
        };
        let gs = ground_state_mps(&params, opts.sector, &cfg)?;
        let entropy = gs.state.entanglement_entropy(l / 2)?;
        GroundReport {
            method: "dmrg".into(),
            l,
            delta,
            j,
            sector: opts.sector,
            energy: gs.energy,
            two_sz: None,
            sweeps: Some(gs.sweeps),
            max_bond_dim: Some(gs.state.max_bond_dim()),
            entropy,
            notes: vec![format!("max discarded weight {:.3e}", gs.max_discarded_weight)],
        }
    };
    let out_dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("spinprobe-out"));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let path = out_dir.join(format!(
        "ground_{}_d{:.4}_L{}.json",
        report.method, delta, l
    ));
    write_json(&path, &report)?;
    println!(
        "ground: method={} L={} delta={} E = {:.12}, S(mid) = {:.6} -> {}",
        report.method,
        l,
        delta,
        report.energy,
        report.entropy,
        path.display()
    );
    Ok(())
}
