use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sicprop(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sicprop"))
        .args(args)
        .env("SICPROP_OUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn transfer_example_stays_under_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = sicprop(dir.path(), &["transfer", "--ds", "4", "--pipeline", "5", "--state", "coherent:1.0", "--alpha", "0.3"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["schema"], "sicprop/1");
    let r = &doc["result"];
    assert!(r["max_norm"].as_f64().unwrap() <= r["bound"].as_f64().unwrap());
    assert_eq!(r["norms"].as_array().unwrap().len(), 5);
    let csv = fs::read_to_string(dir.path().join("transfer.csv")).unwrap();
    assert!(csv.starts_with("step,norm,fidelity\n"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn caustic_is_refused_but_large_times_run() {
    let dir = tempfile::tempdir().unwrap();
    let ok = sicprop(dir.path(), &["green", "--kernel", "harmonic", "--T", "10.0", "--omega", "1.0"]);
    assert_eq!(ok.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("green.csv")).unwrap();
    assert!(csv.starts_with("x_a,x_b,re_g,im_g\n"));
    let bad = sicprop(dir.path(), &["green", "--kernel", "harmonic", "--T", "3.14159265"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("caustic"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sicprop(dir.path(), &["oracle", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(sicprop(dir.path(), &["teleport"]).status.code(), Some(2));
    assert_eq!(sicprop(dir.path(), &["transfer", "--pipeline", "4"]).status.code(), Some(2));
    assert_eq!(sicprop(dir.path(), &["synthesize", "--sign", "0"]).status.code(), Some(2));
    assert_eq!(sicprop(dir.path(), &["oracle", "--candidate", "5", "--solution", "5"]).status.code(), Some(2));
}

#[test]
fn invariant_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // an absurd tolerance makes the overlap check fail
    let out = sicprop(dir.path(), &["oracle", "--theta", "1.1", "--state", "random", "--tol", "oracle=1e-30"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["passed"], false);
}

#[test]
fn same_seed_gives_identical_json() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["oracle", "--state", "random", "--seed", "11", "--n", "4"];
    let (x, y) = (sicprop(a.path(), &args), sicprop(b.path(), &args));
    assert_eq!(x.stdout, y.stdout);
    assert_eq!(fs::read(a.path().join("oracle.json")).unwrap(), fs::read(b.path().join("oracle.json")).unwrap());
    let other = sicprop(a.path(), &["oracle", "--state", "random", "--seed", "12", "--n", "4"]);
    assert_ne!(x.stdout, other.stdout);
}

#[test]
fn timestamp_lives_in_its_own_key() {
    let dir = tempfile::tempdir().unwrap();
    let plain = json(&sicprop(dir.path(), &["expand", "--levels", "4"]));
    let stamped = json(&sicprop(dir.path(), &["expand", "--levels", "4", "--timestamp"]));
    assert!(plain.get("timestamp").is_none());
    assert!(stamped["timestamp"].as_u64().is_some());
    let mut stripped = stamped.clone();
    stripped.as_object_mut().unwrap().remove("timestamp");
    assert_eq!(stripped, plain);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# synthesis run\nd = 3\nalpha = 0.7\noutput = json\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let doc = json(&sicprop(dir.path(), &["synthesize", "--config", cfg]));
    assert_eq!(doc["params"]["d"], 3);
    assert_eq!(doc["params"]["alpha"], 0.7);
    assert!(!dir.path().join("synthesize.csv").exists());
    let doc = json(&sicprop(dir.path(), &["synthesize", "--config", cfg, "--d", "5"]));
    assert_eq!(doc["params"]["d"], 5);
    assert_eq!(doc["params"]["alpha"], 0.7);

    fs::write(dir.path().join("bad.cfg"), "ds = 3\n").unwrap();
    let bad = sicprop(dir.path(), &["synthesize", "--config", dir.path().join("bad.cfg").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn out_dir_flag_beats_environment() {
    let (env_dir, flag_dir) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out = sicprop(env_dir.path(), &["expand", "--levels", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(env_dir.path().join("expand.json").exists());
    let csv = fs::read_to_string(env_dir.path().join("expand.csv")).unwrap();
    assert!(csv.starts_with("k,re_b,im_b,nres\n"));

    let flag = flag_dir.path().to_str().unwrap();
    sicprop(env_dir.path(), &["oracle", "--out-dir", flag]);
    assert!(flag_dir.path().join("oracle.json").exists());
    assert!(!env_dir.path().join("oracle.json").exists());
}

#[test]
fn sequential_and_parallel_agree() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["pathint", "--N-list", "8,16", "--points", "64"];
    let par = sicprop(dir.path(), &args);
    let mut seq_args = args.to_vec();
    seq_args.push("--sequential");
    let seq = sicprop(dir.path(), &seq_args);
    assert_eq!(json(&par)["result"], json(&seq)["result"]);
}

#[test]
fn verify_subset_reports_each_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = sicprop(dir.path(), &["verify-all", "--seed", "7", "--only", "1,7,8"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let crit = doc["result"]["criteria"].as_array().unwrap();
    assert_eq!(crit.len(), 3);
    for c in crit {
        assert_eq!(c["passed"], true);
        assert!(c["name"].is_string() && c["detail"].is_string());
    }
    let csv = fs::read_to_string(dir.path().join("verify-all.csv")).unwrap();
    assert!(csv.starts_with("id,name,passed,measured,tolerance,known_limit\n"));
}

#[test]
fn known_limits_are_excused_only_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let strict = sicprop(dir.path(), &["verify-all", "--only", "13"]);
    assert_eq!(strict.status.code(), Some(1));
    let lenient = sicprop(dir.path(), &["verify-all", "--only", "13", "--allow-known-limits"]);
    assert_eq!(lenient.status.code(), Some(0));
    assert_eq!(json(&lenient)["result"]["criteria"][0]["known_limit"], true);
}

#[test]
fn perturb_and_compose_report_expected_orders() {
    let dir = tempfile::tempdir().unwrap();
    let out = sicprop(dir.path(), &["perturb", "--order", "2", "--lambda-list", "0.1,0.05", "--fock-dim", "30"]);
    assert_eq!(out.status.code(), Some(0));
    let k = json(&out)["result"]["fitted_exponent"].as_f64().unwrap();
    assert!((k - 3.0).abs() < 0.25, "exponent {k}");

    let out = sicprop(dir.path(), &["compose", "--first", "harmonic:0.3", "--second", "harmonic:0.5", "--sign", "-1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["result"]["max_delta"].as_f64().unwrap() < 1e-9);
}
