use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hlab")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn capacity_of_unit_ball() {
    let out = hlab(&["capacity", "--n", "3", "--r", "1.0", "--method", "analytic"]);
    assert!(out.status.success());
    let cap: f64 = stdout(&out).trim().parse().unwrap();
    assert!((cap - 4.0 * std::f64::consts::PI).abs() < 1e-12);

    let out = hlab(&["capacity", "--n", "4", "--r", "0.5"]);
    assert!(out.status.success());
    let cap: f64 = stdout(&out).trim().parse().unwrap();
    let exact = 4.0 * std::f64::consts::PI.powi(2) * 0.25;
    assert!((cap - exact).abs() < 1e-3 * exact);
}

#[test]
fn capacity_rejects_bad_dimension() {
    let out = hlab(&["capacity", "--n", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cell_reports_critical_regime() {
    let out = hlab(&[
        "cell",
        "--n",
        "3",
        "--alpha",
        "3",
        "--eps",
        "0.5",
        "--k",
        "auto",
        "--resolution",
        "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("regime\tCritical"));
    let min_w: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("min_w\t"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(min_w < 1.0);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "kind = corrector\neps = 1/4, 1/2\n");
    assert_eq!(hlab(&["run", bad.to_str().unwrap()]).status.code(), Some(2));
    let unknown = write(dir.path(), "unknown.cfg", "kind = corrector\nwibble = 3\n");
    assert_eq!(hlab(&["run", unknown.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("absent.cfg");
    assert_eq!(hlab(&["run", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn run_then_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "study.cfg",
        "kind = corrector\nn = 3\nalpha = 3\neps = 1/2, 1/3, 1/4\nh_rule = resolve:4\nrecord_wall_time = false\n",
    );
    let out_dir = dir.path().join("report");
    let run = hlab(&["run", cfg.to_str().unwrap(), "--output", out_dir.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let printed = stdout(&run);
    assert!(printed.starts_with("eps,alpha,k,min_w,hole_flux,residual,wall_ms"));
    assert!(printed.contains("PASS"));

    let csv = hlab(&["report", out_dir.to_str().unwrap(), "--format", "csv"]);
    assert!(csv.status.success());
    assert!(
        printed.starts_with(&stdout(&csv)),
        "stored rows must round-trip exactly"
    );

    let json = hlab(&["report", out_dir.to_str().unwrap(), "--format", "json"]);
    assert!(json.status.success());
    assert!(stdout(&json).contains("\"rows\""));

    let plot = hlab(&["report", out_dir.to_str().unwrap(), "--format", "plot"]);
    assert!(plot.status.success());
    assert!(!stdout(&plot).trim().is_empty());
}
