use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str =
    "seed = 3\nruns = 2\n[scenario]\nn_steps = 12\nn_objects = 1\n[tracker]\nparticles = 100\n";

fn flowtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowtrack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = flowtrack(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn column(path: &Path, idx: usize) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(idx).unwrap().to_owned())
        .collect()
}

fn values(path: &Path) -> Vec<f64> {
    column(path, 1).iter().map(|v| v.parse().unwrap()).collect()
}

#[test]
fn simulate_default_scenario_covers_every_step() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("a/b");
    ok(&["simulate", "--seed", "7", "--out", s(&out)]);
    let ks: BTreeSet<u32> = column(&out.join("truth.csv"), 0)
        .iter()
        .map(|k| k.parse().unwrap())
        .collect();
    assert_eq!(ks, (1..=200).collect());
    assert!(out.join("measurements.csv").exists());
    assert!(out.join("config.toml").exists());
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["simulate", "--seed", "7", "--out", s(&a)]);
    ok(&["simulate", "--seed", "7", "--out", s(&b)]);
    for f in ["truth.csv", "measurements.csv", "config.toml"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn track_empty_measurement_file_gives_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let meas = dir.path().join("empty.csv");
    fs::write(&meas, "").unwrap();
    ok(&[
        "track",
        "--config",
        s(&cfg),
        s(&meas),
        "--out",
        s(dir.path()),
    ]);
    let text = fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("k,label_k,label_m,"));
}

#[test]
fn track_is_reproducible_and_finds_the_object() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let sim = dir.path().join("sim");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&sim)]);
    let meas = sim.join("measurements.csv");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["track", "--config", s(&cfg), s(&meas), "--out", s(&a)]);
    ok(&["track", "--config", s(&cfg), s(&meas), "--out", s(&b)]);
    let est = a.join("estimates.csv");
    assert_eq!(
        fs::read(&est).unwrap(),
        fs::read(b.join("estimates.csv")).unwrap()
    );
    let existence = column(&est, 9);
    assert!(!existence.is_empty());
    for e in existence {
        let e: f64 = e.parse().unwrap();
        assert!(e > 0.5 && e <= 1.0, "existence {e}");
    }
    ok(&[
        "evaluate",
        "--config",
        s(&cfg),
        s(&est),
        s(&sim.join("truth.csv")),
        "--out",
        s(&a),
    ]);
    let ospa = values(&a.join("ospa.csv"));
    assert_eq!(ospa.len(), 12);
    assert!(ospa[6..].iter().all(|d| *d < 5.0), "{ospa:?}");
}

/// Writes `truth` rows as estimates, shifted by `dx` along x.
fn truth_as_estimates(truth: &Path, dx: f64, out: &Path) {
    let mut text = String::from("k,label_k,label_m,x,y,z,vx,vy,vz,existence\n");
    for line in fs::read_to_string(truth).unwrap().lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let x: f64 = f[2].parse::<f64>().unwrap() + dx;
        text.push_str(&format!(
            "{},1,{},{x},{},{},{},{},{},1\n",
            f[0], f[1], f[3], f[4], f[5], f[6], f[7]
        ));
    }
    fs::write(out, text).unwrap();
}

fn evaluate(dir: &Path, cfg: &Path, est: &Path, truth: &Path) -> Vec<f64> {
    ok(&[
        "evaluate",
        "--config",
        s(cfg),
        s(est),
        s(truth),
        "--out",
        s(dir),
    ]);
    values(&dir.join("ospa.csv"))
}

#[test]
fn evaluate_against_known_offsets() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    ok(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    let truth = dir.path().join("truth.csv");
    let est = dir.path().join("est.csv");

    truth_as_estimates(&truth, 0.0, &est);
    assert!(evaluate(dir.path(), &cfg, &est, &truth)
        .iter()
        .all(|d| *d == 0.0));

    truth_as_estimates(&truth, 10.0, &est);
    let present: BTreeSet<usize> = column(&truth, 0)
        .iter()
        .map(|k| k.parse::<usize>().unwrap() - 1)
        .collect();
    for (i, d) in evaluate(dir.path(), &cfg, &est, &truth).iter().enumerate() {
        let expected = if present.contains(&i) { 10.0 } else { 0.0 };
        assert!((d - expected).abs() < 1e-9, "k={} {d}", i + 1);
    }

    fs::write(&est, "k,label_k,label_m,x,y,z,vx,vy,vz,existence\n").unwrap();
    for (i, d) in evaluate(dir.path(), &cfg, &est, &truth).iter().enumerate() {
        let expected = if present.contains(&i) { 50.0 } else { 0.0 };
        assert_eq!(*d, expected);
    }
}

#[test]
fn evaluate_rejects_steps_outside_the_horizon() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    ok(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    let est = dir.path().join("est.csv");
    fs::write(
        &est,
        "k,label_k,label_m,x,y,z,vx,vy,vz,existence\n13,1,0,0,0,0,0,0,0,1\n",
    )
    .unwrap();
    let truth = dir.path().join("truth.csv");
    let out = flowtrack(&["evaluate", "--config", s(&cfg), s(&est), s(&truth)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_row_names_the_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let meas = dir.path().join("m.csv");
    let header: Vec<String> = (1..=12).map(|l| format!("z_{l}")).collect();
    let good = ["1"; 12].join(",");
    let bad = good.replacen("1,1", "1,x", 1);
    fs::write(
        &meas,
        format!("k,meas_index,{}\n1,0,{good}\n1,1,{bad}\n", header.join(",")),
    )
    .unwrap();
    let out = flowtrack(&[
        "track",
        "--config",
        s(&cfg),
        s(&meas),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("m.csv:3"), "{err}");
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = TempDir::new().unwrap();
    let bad_key = write_config(dir.path(), "[scenario]\nbogus = 1\n");
    assert_eq!(
        flowtrack(&["simulate", "--config", s(&bad_key), "--out", s(dir.path())])
            .status
            .code(),
        Some(2)
    );
    let bad_value = write_config(dir.path(), "[scenario]\np_d = 1.5\n");
    assert_eq!(
        flowtrack(&[
            "simulate",
            "--config",
            s(&bad_value),
            "--out",
            s(dir.path())
        ])
        .status
        .code(),
        Some(2)
    );
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        flowtrack(&["simulate", "--config", s(&missing), "--out", s(dir.path())])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn mc_outputs_are_consistent() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&[
        "mc",
        "--config",
        s(&cfg),
        "--mode",
        "flow",
        "--mode",
        "bootstrap",
        "--jobs",
        "1",
        "--out",
        s(&a),
    ]);
    ok(&[
        "mc",
        "--config",
        s(&cfg),
        "--mode",
        "flow",
        "--mode",
        "bootstrap",
        "--jobs",
        "2",
        "--out",
        s(&b),
    ]);
    let (flow, boot) = (a.join("mospa_flow.csv"), a.join("mospa_bootstrap.csv"));
    assert_eq!(column(&flow, 0), column(&boot, 0));
    for f in [
        "mospa_flow.csv",
        "mospa_bootstrap.csv",
        "runs/flow/ospa_0000.csv",
        "runs/flow/ospa_0001.csv",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let timing = fs::read_to_string(a.join("timing.csv")).unwrap();
    assert!(timing.starts_with("mode,particles,runs,mean_step_seconds\nflow,100,2,"));

    let single = dir.path().join("single");
    ok(&[
        "mc",
        "--config",
        s(&cfg),
        "--runs",
        "1",
        "--out",
        s(&single),
    ]);
    assert_eq!(
        values(&single.join("mospa_flow.csv")),
        values(&single.join("runs/flow/ospa_0000.csv"))
    );
}

#[test]
fn repeated_mode_is_rejected_outside_mc() {
    let dir = TempDir::new().unwrap();
    let out = flowtrack(&[
        "simulate",
        "--mode",
        "flow",
        "--mode",
        "bootstrap",
        "--out",
        s(dir.path()),
    ]);
    assert!(!out.status.success());
}
