use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn warpgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warpgeo")).args(args).output().expect("spawn warpgeo")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> (i32, String) {
    let mut args = vec!["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = warpgeo(&args);
    (o.status.code().unwrap(), std::fs::read_to_string(out).unwrap_or_default())
}

/// Value of the `closed_form` column for the first row labelled `task`.
fn closed_value(csv: &str, task: &str) -> f64 {
    let line = csv.lines().find(|l| l.starts_with(&format!("{task},"))).unwrap_or_else(|| panic!("no row {task}"));
    line.split(',').nth(3).unwrap().parse().unwrap()
}

const LINE: &str = r#"
[chart.a]
catalog = "euclidean:1"
[chart.b]
catalog = "euclidean:1"
[warp]
base = "a"
fiber = "b"
f1 = "x1"
f2 = "y1"
c = 0.5
[sampling]
points = [[2.0, 3.0]]
[tasks]
run = ["metric", "cometric", "connection", "frame", "identities", "laplacian"]
"#;

const DOUBLY_WARPED: &str = r#"
[chart.base]
catalog = "halfplane2"
[chart.fiber]
catalog = "sphere2"
prefix = "y"
[warp]
base = "base"
fiber = "fiber"
f1 = "1 + x1^2"
f2 = "2 + sin(y2)"
c = 0.0
[sampling]
count = 8
[tasks]
run = ["metric", "cometric", "connection", "frame", "identities", "laplacian"]
"#;

const PARALLEL_H: &str = r#"
[chart.base]
catalog = "euclidean:2"
[chart.fiber]
catalog = "sphere2"
prefix = "y"
[warp]
base = "base"
fiber = "fiber"
f1 = "0.5 + x1 + 0.3*x2"
f2 = "1.5"
c = 0.7
variant = "H"
[fields]
base = ["x1*x2"]
fiber = ["cos(y1)"]
[sampling]
count = 6
[tasks]
run = ["metric", "cometric", "connection", "frame", "identities", "laplacian", "curvature"]
formulas = "rederived"
"#;

#[test]
fn worked_line_example_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "line.toml", LINE);
    let (code, csv) = run(&cfg, &dir.path().join("r.csv"), &[]);
    assert_eq!(code, 0, "{csv}");
    assert!((closed_value(&csv, "metric:det") - 27.0).abs() < 1e-12);
    assert!((closed_value(&csv, "laplacian:f1") - 1.0 / 13.5).abs() < 1e-12);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn doubly_warped_passes_every_task() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "dw.toml", DOUBLY_WARPED);
    let (code, csv) = run(&cfg, &dir.path().join("r.csv"), &[]);
    assert_eq!(code, 0, "{csv}");
    // 8 points: metric 2, cometric 1, connection 3, frame 2, identities 2, laplacian 2 rows each
    assert_eq!(csv.lines().count(), 1 + 8 * 12);
}

#[test]
fn parallel_h_with_curvature_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "h.toml", PARALLEL_H);
    let (code, csv) = run(&cfg, &dir.path().join("r.csv"), &[]);
    assert_eq!(code, 0, "{csv}");
    for label in ["curvature:riemann", "curvature:ricci", "curvature:scalar", "laplacian:base[0]", "laplacian:fiber[0]"] {
        assert!(csv.contains(&format!("\n{label},")), "missing {label}");
    }
}

#[test]
fn published_curvature_forms_fail_comparison() {
    let dir = TempDir::new().unwrap();
    // both corrections carry grad f2, so f2 must vary
    let text = PARALLEL_H
        .replace("catalog = \"sphere2\"", "catalog = \"euclidean:2\"")
        .replace("f2 = \"1.5\"", "f2 = \"1 + 0.5*y1\"")
        .replace("\"rederived\"", "\"published\"");
    let cfg = write(&dir, "h.toml", &text);
    let (code, csv) = run(&cfg, &dir.path().join("r.csv"), &[]);
    assert_eq!(code, 1);
    assert!(csv.lines().any(|l| l.starts_with("curvature:ricci,") && l.ends_with(",false")));
}

#[test]
fn tightened_tolerance_fails_with_exit_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "dw.toml", DOUBLY_WARPED);
    let (code, csv) = run(&cfg, &dir.path().join("r.csv"), &["--tolerance-scale", "1e-30"]);
    assert_eq!(code, 1);
    assert!(csv.contains(",false"));
}

#[test]
fn hypothesis_violation_is_reported_per_point() {
    let dir = TempDir::new().unwrap();
    let text = PARALLEL_H.replace("0.5 + x1 + 0.3*x2", "x1^2").replace("f2 = \"1.5\"", "f2 = \"1 + y1\"");
    let cfg = write(&dir, "bad.toml", &text);
    let (code, csv) = run(&cfg, &dir.path().join("r.csv"), &[]);
    assert_eq!(code, 1);
    let rows: Vec<&str> = csv.lines().filter(|l| l.starts_with("curvature:hypothesis,")).collect();
    assert_eq!(rows.len(), 6);
    // the other tasks are unaffected
    assert!(csv.lines().filter(|l| l.starts_with("laplacian:")).all(|l| l.ends_with(",true")));
}

#[test]
fn critical_coupling_flags_degenerate_points() {
    let dir = TempDir::new().unwrap();
    let text = LINE.replace("c = 0.5", "c = 1.0").replace("points = [[2.0, 3.0]]", "count = 4");
    let cfg = write(&dir, "deg.toml", &text);
    let (code, csv) = run(&cfg, &dir.path().join("r.csv"), &[]);
    assert_eq!(code, 1);
    assert!(csv.lines().any(|l| l.starts_with("frame:degenerate,")));
    assert!(csv.lines().filter(|l| l.starts_with("metric:")).all(|l| l.ends_with(",true")));
}

#[test]
fn undefined_chart_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "m3.toml", &LINE.replace("fiber = \"b\"", "fiber = \"m3\""));
    let o = warpgeo(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("warp.fiber") && err.contains("m3"), "{err}");
    assert_eq!(warpgeo(&["check", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "dw.toml", DOUBLY_WARPED);
    let (_, a) = run(&cfg, &dir.path().join("a.csv"), &[]);
    let (_, b) = run(&cfg, &dir.path().join("b.csv"), &[]);
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn fd_oracle_mode_passes_with_relaxed_tolerances() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "dw.toml", DOUBLY_WARPED);
    let (code, csv) = run(&cfg, &dir.path().join("r.csv"), &["--fd-oracle"]);
    assert_eq!(code, 0, "{csv}");
}

#[test]
fn point_and_catalog_subcommands() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "line.toml", LINE);
    let o = warpgeo(&["point", cfg.to_str().unwrap(), "--at", "2,3"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("det: closed 2.7000000000e1"), "{text}");

    let o = warpgeo(&["point", cfg.to_str().unwrap(), "--at", "20,3"]);
    assert_eq!(o.status.code(), Some(2));

    let o = warpgeo(&["catalog"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("halfplane2"));
}
