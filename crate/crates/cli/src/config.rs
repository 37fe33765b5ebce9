//! Configuration resolution: defaults < TOML file < command-line flags.
//!
//! The fully resolved [`Invocation`] is echoed verbatim into every manifest so
//! any artifact can be reproduced from the manifest alone.

use crate::backend::Backend;
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use spinprobe_core::exact::InitialState;
use spinprobe_core::model::ModelParams;
use std::path::{Path, PathBuf};

/// Initial chain state selector (mirrors the engine's policy).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitialChoice {
    /// Ground state, except the polarized superposition when `delta <= -1`.
    Auto,
    /// Variational / exact ground state regardless of phase.
    Ground,
    /// Equal superposition of the two fully polarized states.
    Cat,
    /// Single fully polarized state.
    Up,
}

impl InitialChoice {
    pub fn to_engine(self) -> InitialState {
        match self {
            InitialChoice::Auto => InitialState::Auto,
            InitialChoice::Ground => InitialState::GroundState,
            InitialChoice::Cat => InitialState::PolarizedSuperposition,
            InitialChoice::Up => InitialState::PolarizedUp,
        }
    }
}

/// One parameter point of a (possibly one-point) sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub delta: f64,
    pub l: usize,
    pub g: f64,
}

/// Fully resolved configuration of a `run` or `sweep` invocation.
///
/// Every field is concrete (defaults already applied); this struct is the
/// manifest's `config` object.
#[derive(Debug, Clone, Serialize)]
pub struct Invocation {
    pub backend: Backend,
    pub j: f64,
    pub h_z: f64,
    /// Sweep axes; a plain `run` holds exactly one value per axis.
    pub deltas: Vec<f64>,
    pub ls: Vec<usize>,
    pub gs: Vec<f64>,
    pub t_max: f64,
    pub dt: f64,
    pub initial: InitialChoice,
    pub chi_max: usize,
    pub cutoff: f64,
    pub max_sweeps: usize,
    pub krylov_tol: f64,
    /// Time dropped before frequency estimation.
    pub transient: f64,
    /// Revival-detector prominence, as a fraction of `|rho01(0)|`.
    pub prominence: f64,
    pub seed: u64,
    pub workers: usize,
    pub paper_scale: bool,
    pub out_dir: PathBuf,
}

impl Invocation {
    /// Cartesian product of the sweep axes, in deterministic order
    /// (length-major, then coupling, then anisotropy).
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.ls.len() * self.gs.len() * self.deltas.len());
        for &l in &self.ls {
            for &g in &self.gs {
                for &delta in &self.deltas {
                    out.push(Point { delta, l, g });
                }
            }
        }
        out
    }

    pub fn model_params(&self, p: &Point) -> Result<ModelParams> {
        ModelParams::new(self.j, p.delta, p.l, p.g, self.h_z)
            .map_err(|e| anyhow!("invalid parameters at delta={}, L={}, g={}: {e}", p.delta, p.l, p.g))
    }

    /// Rejects every unsupported backend/parameter combination.  Called for
    /// all points before any computation starts.
    pub fn gate(&self) -> Result<()> {
        if self.deltas.is_empty() || self.ls.is_empty() || self.gs.is_empty() {
            bail!("sweep axes must be non-empty");
        }
        if !(self.t_max > 0.0) {
            bail!("t_max must be positive, got {}", self.t_max);
        }
        if !(self.dt > 0.0 && self.dt <= self.t_max) {
            bail!("dt must satisfy 0 < dt <= t_max, got dt = {}", self.dt);
        }
        for p in self.points() {
            self.model_params(&p)?;
            match self.backend {
                Backend::Exact | Backend::TclExact => {
                    if p.l > 14 {
                        bail!(
                            "backend `{}` holds full 2^L state vectors and is limited to L <= 14; \
                             got L = {} (use `tdvp` or an analytic backend)",
                            self.backend.as_str(),
                            p.l
                        );
                    }
                }
                Backend::AnalyticPbc | Backend::AnalyticObcDet => {
                    if p.delta != 0.0 {
                        bail!(
                            "backend `{}` is a free-fermion solution valid only at delta = 0; \
                             got delta = {}",
                            self.backend.as_str(),
                            p.delta
                        );
                    }
                }
                Backend::Tdvp | Backend::TclTdvp | Backend::Ising => {}
            }
        }
        Ok(())
    }

    /// `true` when every axis holds exactly one value (a plain `run`).
    pub fn is_single_point(&self) -> bool {
        self.deltas.len() == 1 && self.ls.len() == 1 && self.gs.len() == 1
    }
}

/// One axis value set: `1.5`, `0,0.5,1` or `0.0:3.0:0.25` (inclusive range).
fn parse_f64_axis(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        bail!("empty axis specification");
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!("range syntax is start:end:step, got `{spec}`");
        }
        let (start, end, step): (f64, f64, f64) = (
            parts[0].trim().parse().context("bad range start")?,
            parts[1].trim().parse().context("bad range end")?,
            parts[2].trim().parse().context("bad range step")?,
        );
        if !(step > 0.0) {
            bail!("range step must be positive, got {step}");
        }
        if end < start {
            bail!("range end {end} is below start {start}");
        }
        let n = ((end - start) / step).round() as usize;
        let n = if start + (n as f64) * step <= end + 1e-9 * step { n } else { n - 1 };
        let mut vals = Vec::with_capacity(n + 1);
        for i in 0..=n {
            // Snap to a short decimal so file tags stay clean.
            let v = start + i as f64 * step;
            vals.push((v * 1e9).round() / 1e9);
        }
        Ok(vals)
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad axis value `{s}`")))
            .collect()
    }
}

fn parse_usize_axis(spec: &str) -> Result<Vec<usize>> {
    let vals = parse_f64_axis(spec)?;
    vals.into_iter()
        .map(|v| {
            let n = v.round();
            if (v - n).abs() > 1e-9 || n < 0.0 {
                bail!("axis value {v} is not a non-negative integer");
            }
            Ok(n as usize)
        })
        .collect()
}

/// TOML axis field: a number, an explicit list, or a spec string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Num(f64),
    List(Vec<f64>),
    Spec(String),
}

impl AxisValue {
    fn resolve_f64(&self) -> Result<Vec<f64>> {
        match self {
            AxisValue::Num(v) => Ok(vec![*v]),
            AxisValue::List(v) => {
                if v.is_empty() {
                    bail!("axis list must be non-empty");
                }
                Ok(v.clone())
            }
            AxisValue::Spec(s) => parse_f64_axis(s),
        }
    }

    fn resolve_usize(&self) -> Result<Vec<usize>> {
        self.resolve_f64()?
            .into_iter()
            .map(|v| {
                let n = v.round();
                if (v - n).abs() > 1e-9 || n < 0.0 {
                    bail!("axis value {v} is not a non-negative integer");
                }
                Ok(n as usize)
            })
            .collect()
    }
}

/// Raw TOML configuration; every field optional, flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<Backend>,
    pub j: Option<f64>,
    pub delta: Option<AxisValue>,
    #[serde(rename = "L", alias = "l")]
    pub l: Option<AxisValue>,
    pub g: Option<AxisValue>,
    pub hz: Option<f64>,
    pub tmax: Option<f64>,
    pub dt: Option<f64>,
    pub initial: Option<InitialChoice>,
    pub chi_max: Option<usize>,
    pub cutoff: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub krylov_tol: Option<f64>,
    pub transient: Option<f64>,
    pub prominence: Option<f64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub paper_scale: Option<bool>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid TOML in {}", path.display()))
    }
}

/// Shared command-line options of `run` and `sweep`.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonOpts {
    /// TOML configuration file; flags override its entries.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Computational backend.
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    /// Exchange coupling J (> 0).
    #[arg(long)]
    pub j: Option<f64>,
    /// Anisotropy axis: value, comma list, or start:end:step.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    /// Chain length axis (even values).
    #[arg(long = "L")]
    pub l: Option<String>,
    /// Qubit-chain coupling axis.
    #[arg(long)]
    pub g: Option<String>,
    /// Qubit splitting h_z (pure phase).
    #[arg(long = "hz", allow_hyphen_values = true)]
    pub hz: Option<f64>,
    /// Evolution horizon.
    #[arg(long = "tmax")]
    pub tmax: Option<f64>,
    /// Time step (also the sample spacing).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Initial chain state policy.
    #[arg(long, value_enum)]
    pub initial: Option<InitialChoice>,
    /// Bond-dimension cap for DMRG/TDVP.
    #[arg(long = "chi-max")]
    pub chi_max: Option<usize>,
    /// Truncation (discarded-weight) budget per bond.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// DMRG sweep cap.
    #[arg(long = "max-sweeps")]
    pub max_sweeps: Option<usize>,
    /// Krylov propagation tolerance.
    #[arg(long = "krylov-tol")]
    pub krylov_tol: Option<f64>,
    /// Time dropped before frequency estimation (defaults to 10/J).
    #[arg(long)]
    pub transient: Option<f64>,
    /// Revival-detector prominence (fraction of |rho01(0)|).
    #[arg(long)]
    pub prominence: Option<f64>,
    /// Seed for deterministic eigensolver starts.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker count for sweep points (env SPINPROBE_WORKERS also applies).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Use production-scale defaults (L = 100, longer horizon).
    #[arg(long = "paper-scale")]
    pub paper_scale: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Applies precedence (flags over file over defaults) and resolves every
/// field to a concrete value.
pub fn resolve(opts: &CommonOpts) -> Result<Invocation> {
    let file = match &opts.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };

    let paper_scale = opts.paper_scale || file.paper_scale.unwrap_or(false);
    let j = opts.j.or(file.j).unwrap_or(1.0);

    let deltas = match (&opts.delta, &file.delta) {
        (Some(s), _) => parse_f64_axis(s)?,
        (None, Some(v)) => v.resolve_f64()?,
        (None, None) => vec![1.0],
    };
    let ls = match (&opts.l, &file.l) {
        (Some(s), _) => parse_usize_axis(s)?,
        (None, Some(v)) => v.resolve_usize()?,
        (None, None) => vec![if paper_scale { 100 } else { 48 }],
    };
    let gs = match (&opts.g, &file.g) {
        (Some(s), _) => parse_f64_axis(s)?,
        (None, Some(v)) => v.resolve_f64()?,
        (None, None) => vec![0.25],
    };

    let workers = opts
        .workers
        .or_else(|| {
            std::env::var("SPINPROBE_WORKERS").ok().and_then(|v| v.parse::<usize>().ok())
        })
        .or(file.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);

    let inv = Invocation {
        backend: opts.backend.or(file.backend).unwrap_or(Backend::Tdvp),
        j,
        h_z: opts.hz.or(file.hz).unwrap_or(0.0),
        deltas,
        ls,
        gs,
        t_max: opts
            .tmax
            .or(file.tmax)
            .unwrap_or(if paper_scale { 80.0 } else { 40.0 }),
        dt: opts.dt.or(file.dt).unwrap_or(0.05),
        initial: opts.initial.or(file.initial).unwrap_or(InitialChoice::Auto),
        chi_max: opts.chi_max.or(file.chi_max).unwrap_or(128),
        cutoff: opts.cutoff.or(file.cutoff).unwrap_or(1e-10),
        max_sweeps: opts.max_sweeps.or(file.max_sweeps).unwrap_or(40),
        krylov_tol: opts.krylov_tol.or(file.krylov_tol).unwrap_or(1e-10),
        transient: opts.transient.or(file.transient).unwrap_or(10.0 / j),
        prominence: opts.prominence.or(file.prominence).unwrap_or(0.05),
        seed: opts.seed.or(file.seed).unwrap_or(0x5eed),
        workers,
        paper_scale,
        out_dir: opts.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("spinprobe-out")),
    };
    inv.gate()?;
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_axis_is_inclusive_and_snapped() {
        let v = parse_f64_axis("0.0:3.0:0.25").unwrap();
        assert_eq!(v.len(), 13);
        assert_eq!(v[0], 0.0);
        assert_eq!(*v.last().unwrap(), 3.0);
        assert_eq!(v[3], 0.75);
    }

    #[test]
    fn list_axis_and_single_value() {
        assert_eq!(parse_f64_axis("-0.5, 0, 2.5").unwrap(), vec![-0.5, 0.0, 2.5]);
        assert_eq!(parse_f64_axis("1.5").unwrap(), vec![1.5]);
        assert_eq!(parse_usize_axis("24,32,40,48").unwrap(), vec![24, 32, 40, 48]);
        assert!(parse_usize_axis("3.5").is_err());
        assert!(parse_f64_axis("1:0:0.5").is_err());
        assert!(parse_f64_axis("0:1:-0.5").is_err());
    }
}
