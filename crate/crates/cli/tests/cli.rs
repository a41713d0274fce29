use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cvdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvdist"))
        .args(args)
        .env_remove("CVDIST_SEED")
        .output()
        .expect("run cvdist")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn make(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let p = dir.path().join(name);
    let mut all = args.to_vec();
    all.extend(["--out", s(&p)]);
    let o = cvdist(&all);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    p
}

#[test]
fn tmsv_state() {
    let o = cvdist(&["state", "--kind", "tmsv", "--r", "0.5"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["modes"], 2);
    let d = v["cov"][0][0].as_f64().unwrap();
    assert!((d - 1.5430806).abs() < 1e-7);
}

#[test]
fn vacuum_state_is_identity() {
    let v = stdout_json(&cvdist(&["state", "--kind", "vacuum", "--modes", "2"]));
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(v["cov"][i][j].as_f64().unwrap(), if i == j { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn unphysical_custom_state_exits_3() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.json", r#"{"modes": 1, "mean": [0, 0], "cov": [[0.5, 0], [0, 0.5]]}"#);
    let o = cvdist(&["state", "--kind", "custom-json", "--input", s(&p)]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("0.5"), "{err}");
}

#[test]
fn malformed_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "junk.json", "{ not json");
    assert_eq!(code(&cvdist(&["state", "--kind", "custom-json", "--input", s(&p)])), 2);
    assert_eq!(code(&cvdist(&["state", "--kind", "thermal"])), 2);
    assert_eq!(code(&cvdist(&["state", "--kind", "squeezy"])), 2);
}

#[test]
fn nogo_example_and_determinism() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = cvdist(&["nogo", "--rs", "0.2,0.5", "--starts", "10", "--budget", "500", "--seed", "7", "--csv", s(p)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,input_EN,best_EN,gap,n_starts,n_evals,seed");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.2,") && lines[1].ends_with(",10,5000,7"));
    // No temporary files left behind.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn nogo_stdout_matches_file() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("out.csv");
    let args = ["nogo", "--rs", "0.3", "--starts", "2", "--budget", "100"];
    let o = cvdist(&args);
    let mut with_file = args.to_vec();
    with_file.extend(["--csv", s(&p)]);
    assert_eq!(code(&cvdist(&with_file)), 0);
    assert_eq!(o.stdout, std::fs::read(&p).unwrap());
    assert!(String::from_utf8_lossy(&o.stdout).contains(",1729\n"));
}

#[test]
fn nogo_seed_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_cvdist"))
        .args(["nogo", "--rs", "0.3", "--starts", "2", "--budget", "100"])
        .env("CVDIST_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).trim_end().ends_with(",42"));
}

#[test]
fn nogo_rejects_empty_list() {
    assert_eq!(code(&cvdist(&["nogo", "--rs", ""])), 2);
    assert_eq!(code(&cvdist(&["nogo", "--rs", "0.1,abc"])), 2);
    assert_eq!(code(&cvdist(&["nogo"])), 2);
}

#[test]
fn nogo_certificate_replays_in_fig2() {
    let dir = TempDir::new().unwrap();
    let cert = dir.path().join("cert.json");
    let o = cvdist(&["nogo", "--rs", "0.4", "--starts", "3", "--budget", "200", "--json", s(&cert)]);
    assert_eq!(code(&o), 0);
    let certs: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    let best = certs[0]["best_E_N"].as_f64().unwrap();
    assert!(certs[0]["scope"].as_str().unwrap().contains("pure"));
    let one = write(&dir, "one.json", &serde_json::to_string(&certs[0]).unwrap());
    let copy = make(&dir, "tmsv.json", &["state", "--kind", "tmsv", "--r", "0.4"]);
    let o = cvdist(&["fig2", "--copy1", s(&copy), "--params", s(&one)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let e = stdout_json(&o)["entanglement"]["log_negativity"].as_f64().unwrap();
    assert!((e - best).abs() < 1e-10);
}

#[test]
fn fig1_identity_channel_on_vacuum() {
    let dir = TempDir::new().unwrap();
    let ch = make(&dir, "id.json", &["channel", "make", "--kind", "identity", "--r", "0.5"]);
    let st = make(&dir, "vac.json", &["state", "--kind", "vacuum"]);
    let report = dir.path().join("report.json");
    let o = cvdist(&["fig1", "--channel", s(&ch), "--state", s(&st), "--samples", "25", "--out", s(&report)]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r["max_cov_deviation"].as_f64().unwrap() < 1e-12);
    assert_eq!(r["samples"].as_array().unwrap().len(), 25);
    assert_eq!(r["seed"], 1729);
}

#[test]
fn fig1_discard_channel_and_negative_control() {
    let dir = TempDir::new().unwrap();
    let discard = make(&dir, "d.json", &["channel", "make", "--kind", "discard", "--nu", "2"]);
    let filt = make(&dir, "f.json", &["channel", "make", "--kind", "filter", "--r", "0.6"]);
    let st = make(&dir, "vac.json", &["state", "--kind", "vacuum"]);
    assert_eq!(code(&cvdist(&["fig1", "--channel", s(&discard), "--state", s(&st)])), 0);
    assert_eq!(code(&cvdist(&["fig1", "--channel", s(&filt), "--state", s(&st)])), 0);
    let o = cvdist(&["fig1", "--channel", s(&filt), "--state", s(&st), "--gain-scale", "1.1"]);
    assert_eq!(code(&o), 5);
}

#[test]
fn dimension_mismatch_exits_4() {
    let dir = TempDir::new().unwrap();
    let filt = make(&dir, "f.json", &["channel", "make", "--kind", "filter"]);
    let two = make(&dir, "t.json", &["state", "--kind", "tmsv"]);
    assert_eq!(code(&cvdist(&["fig1", "--channel", s(&filt), "--state", s(&two)])), 4);
    assert_eq!(code(&cvdist(&["canon", "--state", s(&two)])), 4);
}

#[test]
fn channel_apply_and_entanglement() {
    let dir = TempDir::new().unwrap();
    let filt = make(&dir, "f.json", &["channel", "make", "--kind", "filter", "--r", "0.5"]);
    let two = make(&dir, "t.json", &["state", "--kind", "tmsv", "--r", "0.5"]);
    let out = make(&dir, "o.json", &["channel", "apply", "--channel", s(&filt), "--state", s(&two), "--on", "0"]);
    let o = cvdist(&["entanglement", "--state", s(&out)]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    // tanh s' = tanh(0.5)^2.
    let expected = 2.0 * (0.5f64.tanh().powi(2)).atanh();
    assert!((v["log_negativity"].as_f64().unwrap() - expected).abs() < 1e-10);
    assert_eq!(v["ppt"], false);
    let o = cvdist(&["entanglement", "--state", s(&two), "--alice", "0", "--bob", "0"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn canon_on_vacuum() {
    let dir = TempDir::new().unwrap();
    let vac = make(&dir, "v.json", &["state", "--kind", "vacuum", "--modes", "3"]);
    let o = cvdist(&["canon", "--state", s(&vac), "--inputs", "0,1", "--output", "2"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    for k in ["a", "b", "c"] {
        assert!((v[k].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
    let th = make(&dir, "th.json", &["state", "--kind", "thermal", "--nu", "1.5,1,1"]);
    assert_eq!(code(&cvdist(&["canon", "--state", s(&th)])), 2);
}

#[test]
fn fig2_identity_protocol() {
    let dir = TempDir::new().unwrap();
    let copy = make(&dir, "t.json", &["state", "--kind", "tmsv", "--r", "0.5"]);
    let o = cvdist(&["fig2", "--copy1", s(&copy), "--sample-outcomes"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert!((v["entanglement"]["log_negativity"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(v["outcome"].as_array().unwrap().len(), 4);
}

#[test]
fn help_lists_default_seed() {
    for cmd in [&["fig1"][..], &["fig2"], &["nogo"], &["channel", "make"]] {
        let mut args = cmd.to_vec();
        args.push("--help");
        let o = cvdist(&args);
        assert_eq!(code(&o), 0);
        let text = String::from_utf8_lossy(&o.stdout);
        assert!(text.contains("[default: 1729]") && text.contains("CVDIST_SEED"), "{text}");
    }
}

#[test]
fn runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let ch = make(&dir, "c.json", &["channel", "make", "--kind", "random-separable", "--seed", "3"]);
    let st = make(&dir, "t.json", &["state", "--kind", "tmsv"]);
    let run = |name: &str| {
        let p = dir.path().join(name);
        assert_eq!(code(&cvdist(&["fig1", "--channel", s(&ch), "--state", s(&st), "--out", s(&p)])), 0);
        std::fs::read(p).unwrap()
    };
    assert_eq!(run("r1.json"), run("r2.json"));
}
