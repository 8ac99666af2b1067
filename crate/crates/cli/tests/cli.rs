use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn liyau(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liyau"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

const SMALL_TORUS: &str = r#"{
  "geometry": { "kind": "FlatTorus1D", "n": 1, "num_points": 64, "extent": 6.283185307179586 },
  "solver": { "p": 1.5, "dt_max": 1e-3, "snapshot_interval": 0.05, "t_end": 0.5 },
  "initial": { "type": "sinusoidal", "amplitude": 0.5 }
}"#;

#[test]
fn pbar_two_dimensions() {
    let out = liyau(&["pbar", "--n", "2", "--points", "200", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["p_bar_closed"], 4.0);
    assert!((v["p_bar_sweep"].as_f64().unwrap() - 4.0).abs() <= 2e-3);

    let one = liyau(&["pbar", "--n", "1", "--points", "100", "--json"]);
    assert_eq!(one.status.code(), Some(0));
    let v = json(&one);
    assert_eq!(v["p_bar_closed"], 8.0);
    assert!(v["ref_upper"].is_null());
}

#[test]
fn appendix_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("app");
    let out = liyau(&[
        "appendix",
        "--points",
        "100",
        "--out",
        prefix.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("app_appendix.csv")).unwrap();
    assert_eq!(table.lines().count(), 13);
    let row4 = table.lines().nth(4).unwrap();
    assert!(row4.starts_with("4,2.06066") && row4.ends_with(",true"), "{row4}");
    assert!(dir.path().join("app_region.csv").exists());
}

#[test]
fn admissible_exit_codes() {
    let ok = liyau(&[
        "admissible",
        "--n",
        "5",
        "--p",
        "1.1",
        "--alpha",
        "0.5",
        "--beta",
        "0.6",
    ]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["admissible"], true);
    let bad = liyau(&["admissible", "--n", "3", "--p", "1.5", "--alpha", "1", "--beta", "0.1"]);
    assert_eq!(bad.status.code(), Some(1));
    let err = liyau(&["admissible", "--n", "3", "--p", "1.5", "--alpha", "2", "--beta", "0.1"]);
    assert_eq!(err.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&err.stderr).contains("alpha"));
}

#[test]
fn region_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("region.csv");
    let out = liyau(&[
        "region",
        "--n",
        "3",
        "--p",
        "1.5",
        "--points",
        "10",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("alpha,beta,admissible,cond2,cond1_slack,epsilon,convexity_coeff")
    );
    assert_eq!(lines.count(), 100);
    assert_eq!(json(&out)["total"], 100);
}

#[test]
fn trivial_config_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("triv");
    let cfg = config("trivial_p2.json");
    let out = liyau(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        prefix.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    let fit = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "blowup")
        .unwrap();
    assert!((fit["data"]["t_fit"].as_f64().unwrap() - 1.0).abs() <= 1e-3);
    for suffix in ["_umax.csv", "_meta.json", "_snap_0.csv", "_blowup.csv", "_report.json"] {
        assert!(dir.path().join(format!("triv{suffix}")).exists(), "{suffix}");
    }
    let blowup = std::fs::read_to_string(dir.path().join("triv_blowup.csv")).unwrap();
    assert!(blowup.starts_with("t,umax,q\n"));
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("trivial_p2.json"))
        .unwrap()
        .replace("\"decay\": true", "\"decay\": true, \"rescale\": true");
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, text).unwrap();
    let out = liyau(&["run", "--config", path.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["passed"], false);
}

#[test]
fn negative_p_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, SMALL_TORUS.replace("\"p\": 1.5", "\"p\": -1.5")).unwrap();
    let out = liyau(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("solver.p"), "{err}");
}

#[test]
fn simulate_then_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, SMALL_TORUS).unwrap();
    let run = dir.path().join("run");
    let out = liyau(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["blew_up"], false);
    assert_eq!(meta["config"]["solver"]["p"], 1.5);

    let run_s = run.to_str().unwrap();
    let margins = dir.path().join("m");
    let out = liyau(&[
        "check-liyau",
        "--run",
        run_s,
        "--alpha",
        "1",
        "--beta",
        "0.6666666666666666",
        "--out",
        margins.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["per_snapshot"].as_array().unwrap().len(), 10);
    let csv = std::fs::read_to_string(dir.path().join("m_liyau.csv")).unwrap();
    assert!(csv.starts_with("t,min_margin\n"));

    let out = liyau(&[
        "check-harnack",
        "--run",
        run_s,
        "--alpha",
        "1",
        "--beta",
        "0.6666666666666666",
        "--seed",
        "7",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["holds_simple"], 20);

    let out = liyau(&[
        "check-harnack",
        "--run",
        run_s,
        "--alpha",
        "1",
        "--beta",
        "0.6666666666666666",
        "--x1",
        "1",
        "--t1",
        "0.1",
        "--x2",
        "2",
        "--t2",
        "0.4",
        "--json",
    ]);
    assert_eq!(json(&out)["draws"], 1);

    let out = liyau(&[
        "check-mono",
        "--run",
        run_s,
        "--alpha",
        "1",
        "--beta",
        "0.6666666666666666",
        "--json",
    ]);
    assert!(json(&out)["mono_margin"].is_number());

    let out = liyau(&["blowup", "--run", run_s]);
    assert_eq!(out.status.code(), Some(2), "a run that never blew up has no fit");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, SMALL_TORUS).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for prefix in [&a, &b] {
        let out = liyau(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            prefix.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    for suffix in ["_umax.csv", "_snap_3.csv", "_snap_10.csv"] {
        let read = |p: &Path| std::fs::read(format!("{}{suffix}", p.display())).unwrap();
        assert_eq!(read(&a), read(&b), "{suffix}");
    }
}

#[test]
fn static_check_csv() {
    let out = liyau(&["static-check", "--profile", "talenti", "--radii", "0:10:0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("r,u,residual\n0,24,0\n"));
    assert_eq!(text.lines().count(), 102);

    let fd = liyau(&[
        "static-check",
        "--radii",
        "0.5:10:0.5",
        "--fd-step",
        "1e-3",
        "--tol",
        "1e-12",
        "--json",
    ]);
    assert_eq!(fd.status.code(), Some(1), "finite differences are not exact");
    let other = liyau(&["static-check", "--profile", "bubble"]);
    assert_eq!(other.status.code(), Some(2));
}

#[test]
fn thread_cap_is_honoured() {
    let out = Command::new(env!("CARGO_BIN_EXE_liyau"))
        .args(["static-check", "--radii", "0:1:0.25", "--json"])
        .env("LIYAU_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let bad = Command::new(env!("CARGO_BIN_EXE_liyau"))
        .args(["static-check"])
        .env("LIYAU_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
