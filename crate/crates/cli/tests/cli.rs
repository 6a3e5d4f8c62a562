use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use wcs_cli::svg::{self, Series};

fn wcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wcs"))
        .args(args)
        .env_remove(wcs_cli::OUT_DIR_ENV)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("wcs-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() || !path.exists() {
        std::fs::write(&path, actual).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert!(
        want == actual,
        "{name} differs from golden file; rerun with UPDATE_GOLDEN=1 if intended"
    );
}

#[test]
fn kernel_example() {
    let r = json(&wcs(&["kernel", "--beta", "1", "--a", "0,1", "--b", "0,2"]));
    assert_eq!(r["command"], "kernel");
    assert!((r["result"]["re"].as_f64().unwrap() - 0.888889).abs() < 1e-6);
    assert_eq!(r["result"]["im"].as_f64().unwrap(), 0.0);
    assert_eq!(r["config"]["beta"], 1.0);
    assert_eq!(r["config"]["b"]["q"], 2.0);
    assert!(r["metadata"]["unix_time"].is_u64());
}

#[test]
fn kernel_quadrature_agrees() {
    let r = json(&wcs(&[
        "kernel",
        "--beta",
        "1.5",
        "--a",
        "-0.3,0.8",
        "--b",
        "0.4,1.6",
        "--quadrature",
    ]));
    assert!(r["result"]["quadrature"]["abs_diff"].as_f64().unwrap() < 1e-8);
}

#[test]
fn toy_example() {
    let r = json(&wcs(&["toy", "--nu", "4", "--T", "1", "--dx", "1"]));
    let v = r["result"]["rescaled"].as_f64().unwrap();
    assert!((v - (-0.125f64).exp()).abs() < 1e-12);
}

#[test]
fn dynamics_example() {
    let r = json(&wcs(&[
        "dynamics", "--R", "1", "--S", "1", "--T", "1", "--b", "0,1",
    ]));
    assert!((r["result"]["p"].as_f64().unwrap() - 1.718282).abs() < 1e-6);
    assert!((r["result"]["q"].as_f64().unwrap() - 0.367879).abs() < 1e-6);
}

#[test]
fn resolution_diverges_below_half() {
    let dir = scratch("res");
    let out = wcs(&[
        "resolution",
        "--beta",
        "0.4",
        "--diverge-scan",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    let r = json(&out);
    assert_eq!(r["result"]["verdict"], "diverging");
    let csv = std::fs::read_to_string(dir.join("resolution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,re,im"));
    assert!(lines.count() >= 10);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn selftest_quick_passes() {
    let r = json(&wcs(&["selftest", "--quick"]));
    assert_eq!(r["result"]["passed"], true);
    assert_eq!(r["result"]["criteria"].as_array().unwrap().len(), 6);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["kernel", "--beta", "-1", "--a", "0,1", "--b", "0,2"][..],
        &["kernel", "--beta", "1", "--a", "0,-1", "--b", "0,2"],
        &["frobnicate"],
        &["mc", "--beta", "1", "--nus", "4,8", "--steps", "2"],
        &["mc", "--beta", "1", "--nus", "4,4,4", "--samples", "200"],
    ] {
        let out = wcs(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let e: Value = serde_json::from_slice(&out.stderr).expect("stderr is a JSON error record");
        assert_eq!(e["error"]["kind"], "usage");
    }
}

#[test]
fn numeric_failures_exit_1() {
    // At β = 1 the measure integral of the candidate symbol does not converge.
    let out = wcs(&[
        "dynamics", "--mode", "weak", "--beta", "1", "--R", "1", "--S", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "numeric");
}

#[test]
fn weak_symbol_fit() {
    let r = json(&wcs(&[
        "dynamics", "--mode", "weak", "--beta", "2", "--R", "1", "--S", "0.5",
    ]));
    assert!(r["result"]["residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn help_exits_0() {
    assert_eq!(wcs(&["--help"]).status.code(), Some(0));
    assert_eq!(wcs(&["--version"]).status.code(), Some(0));
}

fn strip_metadata(out: &Output) -> Value {
    let mut v = json(out);
    v.as_object_mut().unwrap().remove("metadata");
    v
}

#[test]
fn reproducible_json() {
    let args = [
        "mc",
        "--beta",
        "0.4",
        "--a",
        "0,1",
        "--b",
        "0.5,1",
        "--samples",
        "2000",
        "--seed",
        "7",
    ];
    let a = serde_json::to_string(&strip_metadata(&wcs(&args))).unwrap();
    let b = serde_json::to_string(&strip_metadata(&wcs(&args))).unwrap();
    assert_eq!(a, b);
    let other = [
        "mc",
        "--beta",
        "0.4",
        "--a",
        "0,1",
        "--b",
        "0.5,1",
        "--samples",
        "2000",
        "--seed",
        "8",
    ];
    assert_ne!(a, serde_json::to_string(&strip_metadata(&wcs(&other))).unwrap());
    assert!(a.contains("\"seed\":7"));
}

#[test]
fn config_file_and_flags_win() {
    let dir = scratch("cfg");
    let cfg = dir.join("k.cfg");
    std::fs::write(
        &cfg,
        "# overlap run\ncommand = kernel\nbeta = 2\na = 0,1\nb = 0,2\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let r = json(&wcs(&["--config", c]));
    assert_eq!(r["config"]["beta"], 2.0);
    let r = json(&wcs(&["--config", c, "--beta", "1"]));
    assert_eq!(r["config"]["beta"], 1.0);
    assert!((r["result"]["re"].as_f64().unwrap() - 8.0 / 9.0).abs() < 1e-12);
    std::fs::write(&cfg, "beta 2\n").unwrap();
    assert_eq!(wcs(&["kernel", "--config", c]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn out_dir_from_environment() {
    let dir = scratch("env");
    let out = Command::new(env!("CARGO_BIN_EXE_wcs"))
        .args([
            "mc",
            "--beta",
            "1",
            "--samples",
            "500",
            "--name",
            "run1",
            "--plot",
        ])
        .env(wcs_cli::OUT_DIR_ENV, &dir)
        .output()
        .unwrap();
    let stdout = json(&out);
    let saved: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run1.json")).unwrap()).unwrap();
    assert_eq!(saved, stdout);
    let csv = std::fs::read_to_string(dir.join("run1.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("nu,re,im,err"));
    assert_eq!(csv.lines().count(), 4);
    assert!(std::fs::read_to_string(dir.join("run1.svg"))
        .unwrap()
        .starts_with("<svg"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn no_svg_without_plot() {
    let dir = scratch("noplot");
    json(&wcs(&[
        "resolution",
        "--beta",
        "2",
        "--doublings",
        "8",
        "--out-dir",
        dir.to_str().unwrap(),
    ]));
    assert!(dir.join("resolution.json").exists());
    assert!(!dir.join("resolution.svg").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn golden_line_plot() {
    let s = [
        Series {
            label: "Re".into(),
            points: (0..8).map(|i| (i as f64 / 7.0, (i as f64 * 0.4).cos())).collect(),
        },
        Series {
            label: "Im & more".into(),
            points: (0..8).map(|i| (i as f64 / 7.0, (i as f64 * 0.4).sin())).collect(),
        },
    ];
    golden("line_plot.svg", &svg::line_plot("two <series>", "x", "y", &s));
}

#[test]
fn golden_heatmap() {
    let v: Vec<f64> = (0..48)
        .map(|k| ((k % 8) as f64 - 3.5) * ((k / 8) as f64 - 2.5))
        .collect();
    golden("heatmap.svg", &svg::heatmap("saddle", 8, 6, &v));
}

#[test]
fn golden_mc_plot() {
    let dir = scratch("gold");
    json(&wcs(&[
        "mc",
        "--beta",
        "1",
        "--samples",
        "1000",
        "--seed",
        "3",
        "--plot",
        "--out-dir",
        dir.to_str().unwrap(),
    ]));
    golden("mc.svg", &std::fs::read_to_string(dir.join("mc.svg")).unwrap());
    std::fs::remove_dir_all(&dir).unwrap();
}
