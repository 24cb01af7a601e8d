use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rdl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdl"))
        .args(args)
        .env_remove("RDL_CAP")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

fn gen(dir: &Path, name: &str, q: &str, n: &str, m: &str, seed: &str) -> String {
    let path = dir.join(name);
    let p = path.to_str().unwrap().to_string();
    let out = rdl(&["gen-instance", "--q", q, "--n", n, "--m", m, "--seed", seed, "--out", &p]);
    assert!(out.status.success());
    p
}

#[test]
fn identities_example_passes() {
    let out = rdl(&["identities", "--q", "2", "--n", "1", "--m", "3", "--f", r#"{"kind":"uniform"}"#, "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["passed"], Value::Bool(true));
    assert!(r["checks"].as_array().unwrap().len() >= 8);
}

#[test]
fn end_to_end_base_level_succeeds() {
    let out = rdl(&["end-to-end", "--n", "1", "--l", "1", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let s = r["body"]["mean_success"].as_f64().unwrap();
    assert!((s - 1.0).abs() < 1e-9);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(rdl(&["bogus"]).status.code(), Some(2));
    assert_eq!(rdl(&["pgm"]).status.code(), Some(2));
}

#[test]
fn reports_are_deterministic() {
    let a = report(&rdl(&["end-to-end", "--n", "1", "--l", "1", "--seed", "9"]));
    let b = report(&rdl(&["end-to-end", "--n", "1", "--l", "1", "--seed", "9"]));
    assert_eq!(
        serde_json::to_string(&without_timing(a)).unwrap(),
        serde_json::to_string(&without_timing(b)).unwrap()
    );
}

#[test]
fn gen_instance_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.json", "4", "1", "9", "42");
    let b = gen(dir.path(), "b.json", "4", "1", "9", "42");
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let v: Value = serde_json::from_slice(&ta).unwrap();
    for row in v["A"].as_array().unwrap() {
        for e in row.as_array().unwrap() {
            assert!(e.as_u64().unwrap() < 4);
        }
    }
    let out = rdl(&["gen-instance", "--q", "4", "--n", "1", "--m", "9", "--seed", "42"]);
    let digest = report(&out)["body"]["digest"].as_str().unwrap().to_string();
    assert_eq!(digest, rdl_core::rng::sha256_hex(&ta));
}

#[test]
fn solve_then_recover_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "i.json", "2", "1", "3", "5");
    let solved = report(&rdl(&["solve", "--instance", &inst, "--seed", "1"]));
    assert_eq!(solved["passed"], Value::Bool(true));
    let x = serde_json::to_string(&solved["body"]["outcome"]["x"]).unwrap();
    let tape = solved["body"]["tape"].as_str().unwrap().to_string();
    let rec = rdl(&["recover", "--instance", &inst, "--solution", &x]);
    assert_eq!(rec.status.code(), Some(0));
    assert_eq!(report(&rec)["body"]["tape"].as_str().unwrap(), tape);
}

#[test]
fn error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"q":4,"n":1,"m":3,"A":[[9,1,0]]}"#).unwrap();
    let out = rdl(&["pgm", "--instance", bad.to_str().unwrap(), "--f", r#"{"kind":"uniform"}"#]);
    assert_eq!(out.status.code(), Some(4));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "E_ENTRY_RANGE");

    let inst = gen(dir.path(), "i.json", "4", "1", "9", "1");
    let out = rdl(&["--cap", "100", "pgm", "--instance", &inst, "--f", r#"{"kind":"uniform"}"#]);
    assert_eq!(out.status.code(), Some(3));

    let out = rdl(&["pgm", "--instance", "/nonexistent.json", "--f", r#"{"kind":"uniform"}"#]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn forward_and_reverse_run_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "i.json", "2", "1", "3", "8");
    let f = dir.path().join("f.json");
    std::fs::write(&f, r#"{"kind":"gaussian","sigma":0.7}"#).unwrap();
    for oracle in ["pgm", "symmetrized-pgm", "symmetrized-biased"] {
        let out = rdl(&[
            "forward", "--instance", &inst, "--f", f.to_str().unwrap(), "--T", r#"{"kind":"binary"}"#, "--oracle", oracle,
        ]);
        assert_eq!(out.status.code(), Some(0), "{oracle}");
    }
    for oracle in ["perfect", "solver", "stub"] {
        let out = rdl(&["reverse", "--instance", &inst, "--oracle", oracle]);
        assert_eq!(out.status.code(), Some(0), "{oracle}");
    }
}

#[test]
fn csv_rows_are_appended() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let c = csv.to_str().unwrap();
    for seed in ["1", "2"] {
        let out = rdl(&["end-to-end", "--n", "1", "--l", "1", "--seed", seed, "--csv", c]);
        assert!(out.status.success());
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("subcommand,"));
    assert_eq!(lines.iter().filter(|l| l.starts_with("subcommand,")).count(), 1);
    assert!(lines.iter().any(|l| l.starts_with("end-to-end,") && l.contains(",2,")));
}
