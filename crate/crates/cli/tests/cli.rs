use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn semiwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semiwave")).args(args).env_remove("SEMIWAVE_OUT_DIR").output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn speed_reports_roots_and_embeds_the_config() {
    let out = semiwave(&["speed", "--model", "kpp", "--h", "1.0", "--c", "2.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["lambda1"], 0.5);
    assert_eq!(v["lambda2"], 2.0);
    assert_eq!(v["config"]["model"]["name"], "kpp");
    assert_eq!(v["config"]["c"], 2.5);
}

#[test]
fn missing_model_exits_2_with_usage() {
    let out = semiwave(&["profile"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage: semiwave profile"), "{err}");
    let bad = semiwave(&["speed", "--model", "nicholson", "--p", "0.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn subcritical_speed_is_a_numerical_failure() {
    assert_eq!(semiwave(&["speed", "--model", "kpp", "--c", "1.9"]).status.code(), Some(3));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "c = 3.0\n[model]\nh = 0.0\n").unwrap();
    let out = semiwave(&["speed", "--model", "kpp", "--h", "1", "--c", "2.5", "--config", cfg.to_str().unwrap()]);
    let v = stdout_json(&out);
    assert_eq!(v["c"], 3.0);
    assert_eq!(v["config"]["model"]["h"], 0.0);
    fs::write(&cfg, "[model]\nbogus = 1\n").unwrap();
    let out = semiwave(&["speed", "--model", "kpp", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn profile_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let args = ["profile", "--model", "kpp", "--h", "0.1", "--c", "2.5", "--out-dir", d];
    assert_eq!(semiwave(&args).status.code(), Some(0));
    let first: Vec<Vec<u8>> =
        ["profile.csv", "profile.json", "profile.svg"].iter().map(|f| fs::read(dir.path().join(f)).unwrap()).collect();
    assert_eq!(semiwave(&args).status.code(), Some(0));
    for (f, bytes) in ["profile.csv", "profile.json", "profile.svg"].iter().zip(&first) {
        assert_eq!(&fs::read(dir.path().join(f)).unwrap(), bytes, "{f}");
    }
    let report: Value = serde_json::from_slice(&first[1]).unwrap();
    assert_eq!(report["solution"]["converged"], true);
    assert_eq!(report["oscillation"]["oscillatory"], false);
    let rate = report["decay_fit"]["rate"].as_f64().unwrap();
    assert!((rate - 0.5).abs() < 0.01);
    let csv = String::from_utf8(first[0].clone()).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 3);
    assert!(row.iter().all(|c| c.split('e').next().unwrap().trim_start_matches('-').len() == 18));
    let svg = String::from_utf8(first[2].clone()).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("stroke-dasharray") && svg.contains("tail fit"));
}

#[test]
fn delayed_kpp_profile_oscillates() {
    let dir = tempfile::tempdir().unwrap();
    let out = semiwave(&[
        "profile",
        "--model",
        "kpp",
        "--h",
        "2",
        "--c",
        "2.5",
        "--no-svg",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["oscillation"]["oscillatory"], true);
    assert!(!dir.path().join("profile.svg").exists());
}

#[test]
fn unconverged_profile_exits_4_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[profile]\nmax_iter = 3\n").unwrap();
    let out = semiwave(&[
        "profile",
        "--model",
        "kpp",
        "--c",
        "2.5",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let report: Value = serde_json::from_slice(&fs::read(dir.path().join("profile.json")).unwrap()).unwrap();
    assert_eq!(report["solution"]["converged"], false);
    assert!(report["q_diagnostics"]["error"].is_string());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_semiwave"))
        .args(["speed", "--model", "kpp", "--critical"])
        .env("SEMIWAVE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&fs::read(dir.path().join("speed.json")).unwrap()).unwrap();
    assert_eq!(v["c_star"], 2.0);
}

#[test]
fn verify_exit_codes() {
    let ok = semiwave(&["verify", "--model", "kpp", "--h", "1", "--samples", "2000"]);
    assert_eq!(ok.status.code(), Some(0));
    let v = stdout_json(&ok);
    assert!(v["report"]["pi_integral"].as_f64().unwrap() > 0.0);
    let bad = semiwave(&["verify", "--model", "synthetic_ub", "--samples", "2000"]);
    assert_eq!(bad.status.code(), Some(5));
    let v = stdout_json(&bad);
    assert!(v["report"]["hypotheses"]["UB"]["counterexample"]["lhs"].is_number());
}

#[test]
fn verify_with_uniqueness_seeds() {
    let out =
        semiwave(&["verify", "--model", "nicholson", "--p", "2", "--samples", "1000", "--seeds", "3", "--tol", "1e-8"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["report"]["uniqueness"]["converged"].as_array().unwrap().len(), 3);
    assert!(v["report"]["uniqueness"]["max_distance"].as_f64().unwrap() < 1e-3);
}

#[test]
fn zeros_in_the_default_rectangle() {
    let out = semiwave(&["zeros", "--model", "kpp", "--c", "2.5"]);
    assert_eq!(stdout_json(&out)["zeros"]["count"], 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("z.toml");
    fs::write(&cfg, "[zeros]\nre_min = 0.6\nre_max = 1.9\nim_max = 10.0\n").unwrap();
    let out = semiwave(&["zeros", "--model", "kpp", "--c", "2.5", "--config", cfg.to_str().unwrap()]);
    assert_eq!(stdout_json(&out)["zeros"]["count"], 0);
}

#[test]
fn evolve_writes_front_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = semiwave(&[
        "evolve",
        "--model",
        "kpp",
        "--h",
        "0",
        "--c",
        "2.5",
        "--t-end",
        "15",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["speed"].as_f64().unwrap() - 2.5).abs() < 0.1);
    assert!(v["profile_comparison"]["sup_error"].as_f64().unwrap() < 0.1);
    let front = fs::read_to_string(dir.path().join("front.csv")).unwrap();
    assert!(front.starts_with("t,x\n"));
    assert!(dir.path().join("final.csv").exists());
}
