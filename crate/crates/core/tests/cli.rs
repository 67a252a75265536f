use std::fs;
use std::process::Command;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cavitydtc"))
}

#[test]
fn unknown_config_key_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[drive]\nfrequency = 3.0\n").unwrap();
    let out = cli()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_value_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[drive]\nf_d = 1.5\n").unwrap();
    let out = cli().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = cli().args(["run", "--traj", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trap_coupling_writes_a_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .args(["trap-coupling", "--b-range", "0.01:0.1:4", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("trap_coupling.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn mean_field_run_and_reclassification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[grid]\nwavelengths = 2\n[drive]\ncycles = 20\n[run]\nnoise = false\nwigner = false\n",
    )
    .unwrap();
    let out = cli()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("classification.json")).unwrap()).unwrap();
    assert_eq!(report["label"], "StableDTC");

    let out = cli()
        .args(["classify", "--input"])
        .arg(dir.path().join("run.csv"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("re"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("StableDTC"));
}
