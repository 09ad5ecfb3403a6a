use std::process::Command;

fn prland() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prland"))
}

#[test]
fn error_classes_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = prland().args(["sweep", "--config", "missing.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(out.stderr.split(|b| *b == b'\n').next().unwrap()).unwrap();
    assert_eq!(err["error"], "config-not-found");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[grid]\nn = \"many\"\n").unwrap();
    let out = prland().args(["sweep", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(4));

    let out = prland().args(["bbp", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = prland()
        .args(["bbp", "--density", "pool", "--input", "nope.csv", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn simulate_then_spectrum_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = prland()
        .args(["simulate", "--n", "32", "--alpha", "3", "--seed", "4", "--steps", "200", "--eta", "0.01", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["instance.bin", "trajectory.csv", "final_state.csv", "manifest.json", "loss.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let spec_dir = dir.path().join("spec");
    let out = prland()
        .arg("spectrum")
        .arg("--instance")
        .arg(dir.path().join("instance.bin"))
        .arg("--state")
        .arg(dir.path().join("final_state.csv"))
        .arg("--out")
        .arg(&spec_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["N"], 32);
    let rows = std::fs::read_to_string(spec_dir.join("spectrum.csv")).unwrap();
    assert_eq!(rows.lines().count(), 33);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(spec_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn report_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        format!(
            "[grid]\nn = [16, 24]\nalpha = [2.0, 6.0]\nseeds_per_cell = 2\n[dynamics]\neta = 2e-3\nsteps = \"fixed:300\"\n[output]\ndir = \"{}\"\n",
            dir.path().join("run").display()
        ),
    )
    .unwrap();
    let out = prland().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");
    let files = ["recovery.csv", "crossings.csv", "log_scaling.csv", "recovery.svg", "report.json"];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let out = prland().args(["report", "--run"]).arg(&run).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        snapshots.push(files.map(|f| std::fs::read(run.join(f)).unwrap()));
    }
    assert_eq!(snapshots[0], snapshots[1]);
    let header = std::fs::read_to_string(run.join("recovery.csv")).unwrap();
    assert!(header.starts_with("N,alpha,successes,trials,rate,ci_low,ci_high"));
}

#[test]
fn wishart_density_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = prland()
        .args(["rmt-density", "--alpha", "4", "--density", "constant", "--weight", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["left_edge"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((v["right_edge"].as_f64().unwrap() - 9.0).abs() < 1e-5);
    assert!((v["mass"].as_f64().unwrap() - 1.0).abs() < 1e-3);
}
