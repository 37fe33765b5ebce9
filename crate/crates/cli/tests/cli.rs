//! End-to-end checks of the command-line interface: artifact layout, file
//! formats, configuration precedence, capability gating, and determinism.

use num_complex::Complex64;
use spinprobe_cli::output::{read_trace_csv, write_trace_csv};
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinprobe"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("process launch");
    assert!(
        out.status.success(),
        "expected success for {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("process launch");
    assert!(
        !out.status.success(),
        "expected failure for {args:?}\nstdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    serde_json::from_str(&text)
        .unwrap_or_else(|e| panic!("invalid JSON in {}: {e}", path.display()))
}

#[test]
fn help_lists_all_subcommands() {
    let out = run_ok(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["run", "sweep", "compare", "verify", "ground"] {
        assert!(text.contains(sub), "help is missing `{sub}`:\n{text}");
    }
}

#[test]
fn run_produces_trace_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "run", "--backend", "exact", "--L", "8", "--delta", "0.5", "--g", "0.25",
        "--tmax", "2", "--dt", "0.1", "--out", out.to_str().unwrap(),
    ]);

    let trace_path = out.join("coherence_exact_d0.5000_L8_g0.2500.csv");
    let report_path = out.join("report_exact_d0.5000_L8_g0.2500.json");
    assert!(trace_path.is_file(), "missing {}", trace_path.display());
    assert!(report_path.is_file(), "missing {}", report_path.display());
    assert!(out.join("manifest.json").is_file());
    assert!(out.join("progress.log").is_file());

    let body = std::fs::read_to_string(&trace_path).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("t,re_rho01,im_rho01,abs_rho01"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 21, "tmax 2 at dt 0.1 means 21 samples");
    // Every field must be full-precision scientific notation: parsing and
    // re-rendering with the pinned format must reproduce the text exactly.
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 4, "bad row {row}");
        for field in fields {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), field, "field not in pinned format");
        }
    }
    let first: Vec<f64> = rows[0].split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert_eq!(first[3], 0.5, "|rho01(0)| must be exactly 1/2");

    let report = read_json(&report_path);
    assert_eq!(report["backend"], "exact");
    assert_eq!(report["delta"], 0.5);
    assert_eq!(report["l"], 8);
    assert!(report["entropy"].as_f64().unwrap() > 0.0);

    // The manifest echoes every setting, including ones left at defaults.
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "run");
    let cfg = &manifest["config"];
    assert_eq!(cfg["backend"], "exact");
    assert_eq!(cfg["j"], 1.0);
    assert_eq!(cfg["h_z"], 0.0);
    assert_eq!(cfg["chi_max"], 128);
    assert_eq!(cfg["cutoff"], 1e-10);
    assert_eq!(cfg["max_sweeps"], 40);
    assert_eq!(cfg["seed"], 0x5eed);
    assert_eq!(cfg["prominence"], 0.05);
    assert_eq!(cfg["initial"], "auto");
    assert_eq!(manifest["points"].as_array().unwrap().len(), 1);
}

#[test]
fn run_rejects_multi_valued_axes() {
    let dir = tempfile::tempdir().unwrap();
    let stderr = run_err(&[
        "run", "--backend", "exact", "--L", "8", "--delta", "0:1:0.5",
        "--tmax", "1", "--dt", "0.1", "--out", dir.path().join("x").to_str().unwrap(),
    ]);
    assert!(stderr.contains("sweep"), "should point at `sweep`: {stderr}");
}

#[test]
fn capability_gate_rejects_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never-created");
    let args_tail = ["--tmax", "1", "--dt", "0.1", "--out", out.to_str().unwrap()];

    let stderr = run_err(&[&["run", "--backend", "exact", "--L", "16", "--delta", "0"], &args_tail[..]].concat());
    assert!(stderr.contains("14"), "should cite the length limit: {stderr}");

    let stderr = run_err(&[&["run", "--backend", "tcl-exact", "--L", "20", "--delta", "0"], &args_tail[..]].concat());
    assert!(stderr.contains("14"), "should cite the length limit: {stderr}");

    let stderr = run_err(&[&["run", "--backend", "analytic-pbc", "--L", "8", "--delta", "0.5"], &args_tail[..]].concat());
    assert!(
        stderr.contains("delta") || stderr.contains("anisotropy"),
        "should cite the anisotropy restriction: {stderr}"
    );

    let stderr = run_err(&[&["run", "--backend", "analytic-obc-det", "--L", "8", "--delta", "-1"], &args_tail[..]].concat());
    assert!(stderr.contains("delta") || stderr.contains("anisotropy"), "{stderr}");

    // A sweep is vetted for every point up front: one bad point stops all.
    let stderr = run_err(&[&["sweep", "--backend", "exact", "--L", "8,16", "--delta", "0"], &args_tail[..]].concat());
    assert!(stderr.contains("14"), "{stderr}");

    assert!(!out.exists(), "gating must reject before creating any output");
}

#[test]
fn sweep_writes_observables_and_ordered_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    run_ok(&[
        "sweep", "--backend", "exact", "--L", "8", "--delta", "0:1:0.5", "--g", "0.25",
        "--tmax", "2", "--dt", "0.1", "--workers", "2", "--out", out.to_str().unwrap(),
    ]);

    for d in ["0.0000", "0.5000", "1.0000"] {
        let f = out.join(format!("coherence_exact_d{d}_L8_g0.2500.csv"));
        assert!(f.is_file(), "missing {}", f.display());
    }
    let obs = std::fs::read_to_string(out.join("observables.csv")).unwrap();
    let mut lines = obs.lines();
    assert_eq!(lines.next(), Some("delta,t_r,omega,entropy"));
    let deltas: Vec<f64> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(deltas, vec![0.0, 0.5, 1.0], "rows must follow the axis order");

    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "sweep");
    let points = manifest["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    assert_eq!(points[1]["delta"], 0.5);
    assert!(points[1]["trace_file"].as_str().unwrap().contains("d0.5000"));
}

#[test]
fn compare_directory_with_itself_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ref");
    run_ok(&[
        "run", "--backend", "exact", "--L", "8", "--delta", "1", "--tmax", "2",
        "--dt", "0.1", "--out", out.to_str().unwrap(),
    ]);
    let cmp = dir.path().join("cmp.json");
    run_ok(&[
        "compare", out.to_str().unwrap(), out.to_str().unwrap(),
        "--out", cmp.to_str().unwrap(),
    ]);
    let summary = read_json(&cmp);
    assert_eq!(summary["max_abs_overall"], 0.0);
    let entries = summary["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["max_abs"], 0.0);
    assert_eq!(entries[0]["rms"], 0.0);
    assert!(entries[0]["first_divergence"].is_null());
}

#[test]
fn config_file_provides_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    let out = dir.path().join("from-file");
    std::fs::write(
        &cfg_path,
        format!(
            "backend = \"exact\"\ndelta = \"0.0:1.0:0.5\"\nL = 8\ng = 0.25\n\
             tmax = 2.0\ndt = 0.1\nworkers = 1\nout = '{}'\n",
            out.display()
        ),
    )
    .unwrap();

    // File alone fixes the axes and the output directory.
    run_ok(&["sweep", "--config", cfg_path.to_str().unwrap()]);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["t_max"], 2.0);
    assert_eq!(manifest["config"]["deltas"].as_array().unwrap().len(), 3);

    // A flag overrides the same entry in the file.
    let out2 = dir.path().join("flag-wins");
    run_ok(&[
        "sweep", "--config", cfg_path.to_str().unwrap(),
        "--tmax", "3", "--delta", "0.25", "--out", out2.to_str().unwrap(),
    ]);
    let manifest2 = read_json(&out2.join("manifest.json"));
    assert_eq!(manifest2["config"]["t_max"], 3.0);
    assert_eq!(
        manifest2["config"]["deltas"].as_array().unwrap(),
        &vec![serde_json::json!(0.25)]
    );

    // Unknown keys in the file are rejected, not silently ignored.
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "backend = \"exact\"\nchimax = 64\n").unwrap();
    let stderr = run_err(&["run", "--config", bad.to_str().unwrap()]);
    assert!(stderr.contains("chimax"), "should name the unknown key: {stderr}");
}

#[test]
fn repeated_invocations_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "run".into(), "--backend".into(), "exact".into(), "--L".into(), "8".into(),
            "--delta".into(), "0.5".into(), "--tmax".into(), "2".into(),
            "--dt".into(), "0.1".into(), "--out".into(),
            out.to_str().unwrap().to_owned(),
        ]
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out_a = bin().args(args(&a)).output().unwrap();
    assert!(out_a.status.success());
    let out_b = bin().args(args(&b)).output().unwrap();
    assert!(out_b.status.success());
    let name = "coherence_exact_d0.5000_L8_g0.2500.csv";
    let bytes_a = std::fs::read(a.join(name)).unwrap();
    let bytes_b = std::fs::read(b.join(name)).unwrap();
    assert_eq!(bytes_a, bytes_b, "identical invocations must produce identical bytes");
}

#[test]
fn malformed_flags_are_rejected() {
    let stderr = run_err(&["run", "--backend", "quantum-annealer"]);
    assert!(stderr.contains("invalid value"), "{stderr}");
    let stderr = run_err(&["run", "--backend", "exact", "--L", "8", "--delta", "0:1:-0.5"]);
    assert!(stderr.contains("step"), "{stderr}");
    let stderr = run_err(&["run", "--backend", "exact", "--L", "7", "--delta", "0"]);
    assert!(stderr.contains("even"), "odd lengths should be refused: {stderr}");
}

#[test]
fn ground_reports_energy_consistently_across_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gs");
    run_ok(&[
        "ground", "--method", "exact", "--L", "8", "--delta", "1",
        "--out", out.to_str().unwrap(),
    ]);
    run_ok(&[
        "ground", "--method", "dmrg", "--L", "8", "--delta", "1",
        "--out", out.to_str().unwrap(),
    ]);
    let exact = read_json(&out.join("ground_exact_d1.0000_L8.json"));
    let dmrg = read_json(&out.join("ground_dmrg_d1.0000_L8.json"));
    let (e_exact, e_dmrg) = (
        exact["energy"].as_f64().unwrap(),
        dmrg["energy"].as_f64().unwrap(),
    );
    assert!(e_exact < 0.0);
    assert!(
        (e_exact - e_dmrg).abs() < 1e-8,
        "solvers disagree: {e_exact} vs {e_dmrg}"
    );
    assert_eq!(exact["two_sz"], 0);
    assert!(dmrg["entropy"].as_f64().unwrap() > 0.0);

    let stderr = run_err(&["ground", "--method", "exact", "--L", "16"]);
    assert!(stderr.contains("14"), "{stderr}");
}

#[test]
fn trace_csv_round_trips_exactly() {
    use spinprobe_core::trace::{CoherenceTrace, TraceMeta};
    let times: Vec<f64> = (0..7).map(|i| i as f64 * 0.3).collect();
    let values: Vec<Complex64> = times
        .iter()
        .map(|&t| Complex64::new(0.5 * (1.7 * t).cos(), -0.01 * t * t))
        .collect();
    let trace = CoherenceTrace::from_samples(times, values, TraceMeta::new("test", None));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    write_trace_csv(&path, &trace).unwrap();
    let back = read_trace_csv(&path).unwrap();
    assert_eq!(back.times(), trace.times());
    assert_eq!(back.values(), trace.values());

    std::fs::write(&path, "t,re,im\n0,0,0\n").unwrap();
    assert!(read_trace_csv(&path).is_err(), "wrong header must be rejected");
}

#[test]
fn workers_env_var_sets_default_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "run".to_string(),
            "--backend".into(),
            "exact".into(),
            "--L".into(),
            "4".into(),
            "--delta".into(),
            "0.5".into(),
            "--tmax".into(),
            "1".into(),
            "--dt".into(),
            "0.5".into(),
            "--out".into(),
            out.to_str().unwrap().to_string(),
        ]
    };

    let out_env = dir.path().join("env");
    let run = bin()
        .args(args(&out_env))
        .env("SPINPROBE_WORKERS", "3")
        .output()
        .expect("process launch");
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let manifest = read_json(&out_env.join("manifest.json"));
    assert_eq!(manifest["config"]["workers"], 3, "env var must set the worker count");

    let out_flag = dir.path().join("flag");
    let mut flagged = args(&out_flag);
    flagged.extend(["--workers".to_string(), "1".into()]);
    let run = bin()
        .args(flagged)
        .env("SPINPROBE_WORKERS", "3")
        .output()
        .expect("process launch");
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let manifest = read_json(&out_flag.join("manifest.json"));
    assert_eq!(manifest["config"]["workers"], 1, "explicit flag must beat the env var");
}
