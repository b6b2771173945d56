use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ioncav::experiments::sha256_hex;

fn ioncav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ioncav")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn budget_report_writes_manifest_with_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "base_seed": 5}"#);
    let out = dir.path().join("out");
    let o = ioncav(&["budget_report", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "budget_report");
    assert_eq!(manifest["base_seed"], 5);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for f in outputs {
        let bytes = fs::read(out.join(f["file"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    let stdout: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((stdout["p_emit"].as_f64().unwrap() - 0.0602).abs() < 1e-3);
}

#[test]
fn compare_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "base_seed": 1}"#);
    let out = dir.path().join("out");
    assert!(ioncav(&["budget_report", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let summary = out.join("summary.json");
    let good = dir.path().join("good.json");
    let bad = dir.path().join("bad.json");
    fs::write(&good, r#"{"quantities": {"p_emit": {"expected": 0.0602, "tolerance": 0.001}}}"#).unwrap();
    fs::write(&bad, r#"{"quantities": {"p_emit": {"expected": 0.5, "tolerance": 0.001}}}"#).unwrap();

    let o = ioncav(&["compare", "--result", summary.to_str().unwrap(), "--golden", good.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS p_emit"));
    let o = ioncav(&["compare", "--result", summary.to_str().unwrap(), "--golden", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL p_emit"));
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("missing.json");
    let o = ioncav(&["g2", "--config", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "base_seed": 1, "warp": 9}"#);
    let o = ioncav(&["g2", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "base_seed": 1, "n_trajectories": 0}"#);
    let o = ioncav(&["g2", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());

    assert_eq!(ioncav(&["teleport"]).status.code(), Some(1));
}

#[test]
fn seed_override_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "base_seed": 1, "n_trajectories": 1500,
            "detection": {"eps_mode": 1.0, "eta_path": 1.0, "eta_det": 1.0}}"#,
    );
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = ioncav(&["emit_histogram", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("histogram.csv")).unwrap()
    };
    let a = run("a", "42");
    let b = run("b", "42");
    let c = run("c", "43");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(String::from_utf8_lossy(&a).starts_with("# manifest: manifest.json"));
}

#[test]
fn shipped_config_parses() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/paper.json");
    let mut cfg = ioncav::experiments::ExperimentConfig::load(Path::new(path)).unwrap();
    for kind in ioncav::experiments::ExperimentKind::ALL {
        cfg.experiment = Some(kind);
        cfg.validate().unwrap();
    }
    assert!((cfg.physics.cavity.kappa / (2.0 * std::f64::consts::PI * 25e6) - 1.0).abs() < 1e-12);
}
