use std::fs;
use std::path::Path;
use std::process::Command;

use fronts_cli::config::{ExperimentConfig, Task};
use fronts_cli::experiment::{run_experiment, RunContext};
use fronts_cli::output::{Manifest, MANIFEST_NAME};
use fronts_cli::plot::{emit_plot_data, PlotKind};

fn run(text: &str, out: &Path) -> anyhow::Result<Manifest> {
    let cfg = ExperimentConfig::parse(text)?;
    cfg.validate(out)?;
    let ctx = RunContext {
        out_dir: out.to_path_buf(),
        base_dir: out.to_path_buf(),
        workers: 1,
        config_text: text.to_string(),
    };
    run_experiment(&cfg, &ctx)
}

fn invalid(text: &str) -> String {
    let cfg = ExperimentConfig::parse(text);
    match cfg {
        Err(e) => format!("{e:#}"),
        Ok(c) => format!("{:#}", c.validate(Path::new(".")).expect_err("config should be rejected")),
    }
}

const SPEED: &str = r#"
schema_version = 1
[task]
kind = "speed_table"
a = [2.0, 4.0]
"#;

#[test]
fn unknown_keys_and_versions_are_rejected() {
    let e = invalid("schema_version = 1\ncolour = 3\n[task]\nkind = \"speed_table\"\na = [1.0]\n");
    assert!(e.contains("colour"), "{e}");
    let e = invalid("schema_version = 2\n[task]\nkind = \"speed_table\"\na = [1.0]\n");
    assert!(e.contains("schema_version"), "{e}");
    let e = invalid("schema_version = 1\n[task]\nkind = \"warp_drive\"\n");
    assert!(e.contains("warp_drive"), "{e}");
}

#[test]
fn ranges_are_validated() {
    let cases = [
        ("[task]\nkind = \"speed_table\"\na = []", "empty"),
        ("[task]\nkind = \"speed_table\"\na = [-1.0]", "nonnegative"),
        ("[task]\nkind = \"drift_sweep\"\na = [1.0]\nt_end = 100.0\nwindow = [10.0, 20.0]", "window"),
        ("[task]\nkind = \"drift_sweep\"\na = [1.0]\nt_end = 100.0\nwindow = [10.0, 80.0]\nlevel = 1.5", "level"),
        ("[task]\nkind = \"construction_audit\"\nconstruction = \"fast_sub\"", "reaction"),
        (
            "[reaction]\nkind = \"cubic\"\na = 4.0\n[task]\nkind = \"construction_audit\"\nconstruction = \"fast_sub\"\nr = 0.3",
            "(1/2, 1)",
        ),
        ("[task]\nkind = \"spectral_audit\"\n[[task.runs]]\nbc = \"neumann\"\ncoeff = 1.0\ntau_end = 2.0", "tau_end"),
        ("workers = 0\n[task]\nkind = \"speed_table\"\na = [1.0]", "workers"),
    ];
    for (body, needle) in cases {
        let e = invalid(&format!("schema_version = 1\n{body}\n"));
        assert!(e.contains(needle), "expected {needle:?} in {e:?}");
    }
}

#[test]
fn missing_table_file_is_reported() {
    let e = invalid(
        "schema_version = 1\n[reaction]\nkind = \"table\"\npath = \"no/such.csv\"\n[task]\nkind = \"lemma_audit\"\npairs = [[0.01, 0.4]]\n",
    );
    assert!(e.contains("such.csv"), "{e}");
}

#[test]
fn defaults_are_filled() {
    let cfg = ExperimentConfig::parse(
        "schema_version = 1\n[task]\nkind = \"drift_sweep\"\na = [0.0]\nt_end = 200.0\nwindow = [20.0, 200.0]\n",
    )
    .unwrap();
    match cfg.task {
        Task::DriftSweep { dx, dt, level, .. } => assert_eq!((dx, dt, level), (0.05, 0.01, 0.5)),
        _ => panic!("wrong task"),
    }
    assert_eq!(cfg.seed, 0);
}

#[test]
fn reruns_are_byte_identical() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let m1 = run(SPEED, d1.path()).unwrap();
    let m2 = run(SPEED, d2.path()).unwrap();
    assert_eq!(m1.inputs_sha256, m2.inputs_sha256);
    assert_eq!(m1.artifacts, m2.artifacts);
    assert_eq!(m1.find("profile").count(), 2);
    let table = fs::read_to_string(d1.path().join("speed_table.csv")).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("2.0,"), "{table}");
    assert!(d1.path().join(MANIFEST_NAME).exists());
}

#[test]
fn profile_overlay_matches_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    run(SPEED, dir.path()).unwrap();
    let out = dir.path().join("overlay.csv");
    let n = emit_plot_data(&dir.path().join(MANIFEST_NAME), PlotKind::ProfileOverlay, &out).unwrap();
    assert!(n > 100);
    let mut rd = csv::Reader::from_path(&out).unwrap();
    let mut worst: f64 = 0.0;
    for rec in rd.records() {
        let rec = rec.unwrap();
        let (num, exact): (f64, f64) = (rec[2].parse().unwrap(), rec[3].parse().unwrap());
        worst = worst.max((num - exact).abs());
    }
    assert!(worst < 1e-6, "worst deviation {worst}");
}

#[test]
fn missing_artifacts_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    run(SPEED, dir.path()).unwrap();
    let e = emit_plot_data(&dir.path().join(MANIFEST_NAME), PlotKind::ResidualHeatmap, &dir.path().join("x.csv"))
        .unwrap_err();
    assert!(format!("{e:#}").contains("residuals"), "{e:#}");
}

#[test]
fn fixed_grid_audit_certifies_fast_sub() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
schema_version = 1
[reaction]
kind = "cubic"
a = 2.0
[task]
kind = "construction_audit"
construction = "fast_sub"
[task.grid]
t0 = 256.0
t1 = 1024.0
nt = 4
x_margin = 20.0
nx = 200
"#;
    let m = run(text, dir.path()).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "certified", "{report}");
    assert_eq!(report["matching_all_hold"], true);
    let heat = dir.path().join("heat.csv");
    let rows = emit_plot_data(&dir.path().join(MANIFEST_NAME), PlotKind::ResidualHeatmap, &heat).unwrap();
    assert_eq!(rows, 4 * 200);
    assert!(m.find("residuals").count() == 1);
}

#[test]
fn drift_sweep_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
schema_version = 1
[task]
kind = "drift_sweep"
a = [4.0]
t_end = 150.0
dx = 0.1
dt = 0.02
window = [10.0, 150.0]
"#;
    run(text, dir.path()).unwrap();
    let mut rd = csv::Reader::from_path(dir.path().join("drift.csv")).unwrap();
    let h = rd.headers().unwrap().clone();
    let rec = rd.records().next().unwrap().unwrap();
    let r: f64 = rec[h.iter().position(|c| c == "r_fit").unwrap()].parse().unwrap();
    // Pushed front: no logarithmic lag beyond discretization effects.
    assert!(r.abs() < 0.2, "r = {r}");
    let n = emit_plot_data(&dir.path().join(MANIFEST_NAME), PlotKind::DriftVsLogt, &dir.path().join("d.csv")).unwrap();
    assert!(n >= 140);
}

#[test]
fn binary_speed_and_errors() {
    let bin = env!("CARGO_BIN_EXE_fronts");
    let out = Command::new(bin).args(["speed", "--a", "4"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["regime"], "pushed");
    assert!((v["c_star"].as_f64().unwrap() - 1.5 * 2f64.sqrt()).abs() < 1e-9);

    let out = Command::new(bin).args(["sweep", "--config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
