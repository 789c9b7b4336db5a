//! CLI behavior: exit codes, flag validation, data-dir reuse.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diffbench"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("diffbench_cli_{}_{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn unknown_flag_exits_2() {
    let out = bin().args(["gen", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_selection_exits_2() {
    let dir = tmp("missing");
    let out = bin()
        .args(["gen", "--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn missing_input_file_exits_2() {
    let out = bin()
        .args(["plot", "--in", "/nonexistent/results.csv", "--out", "/tmp/x.svg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("gen"));
}

#[test]
fn unsupported_ht_engine_exits_2() {
    let out = bin()
        .args([
            "check",
            "--objective",
            "ht",
            "--size-class",
            "small",
            "--engines",
            "reverse",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_check_reads_back_generated_files() {
    let dir = tmp("roundtrip");
    let data = dir.join("data");
    let status = bin()
        .args([
            "gen",
            "--objective",
            "gmm",
            "--d",
            "2",
            "--k",
            "3",
            "--n",
            "100",
            "--seed",
            "7",
            "--out",
            data.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(data.join("gmm_d2_k3_n100.txt").exists());
    // check must read the file (not regenerate): corrupting it makes the
    // command fail with a usage error.
    let out = bin()
        .args([
            "check", "--objective", "gmm", "--d", "2", "--k", "3", "--n", "100",
            "--engines", "manual,reverse", "--data", data.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(data.join("gmm_d2_k3_n100.txt"), "2 3 100 bogus").unwrap();
    let out = bin()
        .args([
            "check", "--objective", "gmm", "--d", "2", "--k", "3", "--n", "100",
            "--engines", "manual,reverse", "--data", data.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dump_matrix_writes_matrix_market() {
    let dir = tmp("dump");
    let path = dir.join("jac.mtx");
    let out = bin()
        .args([
            "check", "--objective", "ba", "--size", "small", "--dump-matrix",
            path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("%%MatrixMarket matrix coordinate real general"));
    // Header row for (2 cams, 4 pts, 6 obs): 18 rows, 11*2+3*4+6 = 40
    // columns, 31*6 = 186 nonzeros.
    assert_eq!(text.lines().nth(1).unwrap(), "18 40 186");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn env_var_overrides_time_limit() {
    let dir = tmp("envlimit");
    let csv = dir.join("r.csv");
    // A zero limit forces every combination to time out; the run still
    // exits 0 because timeouts are results, not failures.
    let out = bin()
        .env("DIFFBENCH_TIME_LIMIT", "0")
        .args([
            "run", "--objective", "gmm", "--d", "1", "--k", "1", "--n", "10",
            "--engines", "manual", "--out", csv.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("timeout"), "expected timeout rows, got:\n{text}");
    std::fs::remove_dir_all(&dir).unwrap();
}
