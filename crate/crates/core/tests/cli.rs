use std::process::Command;

fn sim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pofl-sim"))
}

#[test]
fn run_then_verify_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    let out = sim().arg("example-config").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap().replace("test_records = 48", "test_records = 16");
    std::fs::write(&cfg, text).unwrap();

    let run_dir = dir.path().join("run");
    let out = sim().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&run_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("round 0 task task-1"));

    let out = sim().args(["verify-chain", "--file"]).arg(run_dir.join("chain.bin")).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("valid chain:"));

    let out = sim().args(["report", "--round", "0", "--dir"]).arg(&run_dir).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("he_bytes"));

    let mut bytes = std::fs::read(run_dir.join("chain.bin")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    let bad = dir.path().join("bad.bin");
    std::fs::write(&bad, bytes).unwrap();
    let out = sim().args(["verify-chain", "--file"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn trade_sweep_prints_csv() {
    let out = sim().args(["sweep", "--axis", "Q", "--values", "6,8,10"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "value,m_star,ds_star,p,pool_utility,provider_utility");
    assert_eq!(lines.len(), 4);
}

#[test]
fn errors_name_the_stage() {
    let out = sim().args(["sweep", "--axis", "nope", "--values", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage sweep"));

    let out = sim().args(["run", "--config", "/nonexistent.toml", "--out", "/tmp/x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage config"));

    let out = sim().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
