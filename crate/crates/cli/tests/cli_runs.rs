use std::path::Path;
use std::process::Command;

fn dualcert(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dualcert"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dualcert(&["sphere", "--no-such-flag"], dir.path()).status.code(), Some(2));
    let out = dualcert(&["certify", "--dataset", "uos", "--dict-size", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(manifest(dir.path())["status"], "failed");
}

#[test]
fn config_file_sets_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "eps_grid = [0.0, 0.5]\nsvg = true\nseed = 3\n").unwrap();
    let out = dualcert(&["sphere", "--config", cfg.to_str().unwrap(), "--seed", "9"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sphere.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("sphere.svg").exists());
    let m = manifest(dir.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["common"]["seed"], 9);
}

#[test]
fn manifest_checksums_match_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dualcert(&["concentration", "--dataset", "uos", "--m-grid", "1,2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    let outputs = m["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for a in outputs {
        let bytes = std::fs::read(dir.path().join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(a["bytes"], bytes.len());
        assert_eq!(a["sha256"].as_str().unwrap().len(), 64);
    }
}
