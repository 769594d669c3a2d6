use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn qnets(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnets")).args(args).output().expect("run qnets")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qnets-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

#[test]
fn gen_is_deterministic_per_seed() {
    let a = qnets(&["gen", "qnet", "--seed", "7", "--rows", "3", "--cols", "5"]);
    let b = qnets(&["gen", "qnet", "--seed", "7", "--rows", "3", "--cols", "5"]);
    let c = qnets(&["gen", "qnet", "--seed", "8", "--rows", "3", "--cols", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let v = json(&a);
    assert_eq!(v["rows"], 3);
    assert_eq!(v["cols"], 5);
    assert_eq!(v["vertices"].as_array().unwrap().len(), 15);
}

#[test]
fn laplace_of_generated_net() {
    let f = scratch("q.json");
    let g = qnets(&["gen", "qnet", "--seed", "3", "--out", f.to_str().unwrap()]);
    assert_eq!(g.status.code(), Some(0));
    let l = qnets(&["laplace", "--in", f.to_str().unwrap(), "--dir", "b"]);
    assert_eq!(l.status.code(), Some(0), "{}", String::from_utf8_lossy(&l.stderr));
    assert!(json(&l).get("vertices").is_some());
}

#[test]
fn constrained_circular_net_passes_envelope_verification() {
    let f = scratch("cc.json");
    let g = qnets(&["gen", "circular:circular-circular", "--ambient", "2", "--seed", "5", "--out", f.to_str().unwrap()]);
    assert_eq!(g.status.code(), Some(0), "{}", String::from_utf8_lossy(&g.stderr));
    let v = qnets(&["verify", "envelope", "--in", f.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stderr));
}

#[test]
fn obj_export_has_one_polyline_per_parameter_line() {
    let f = scratch("e.json");
    qnets(&["gen", "qnet", "--seed", "2", "--rows", "4", "--cols", "6", "--out", f.to_str().unwrap()]);
    let o = qnets(&["export", "--in", f.to_str().unwrap(), "--format", "obj"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let count = |p: &str| text.lines().filter(|l| l.starts_with(p)).count();
    assert_eq!(count("v "), 24);
    assert_eq!(count("o row_"), 4);
    assert_eq!(count("o col_"), 6);
    assert_eq!(count("l "), 10);
}

#[test]
fn empty_net_is_an_input_error() {
    let f = scratch("empty.json");
    std::fs::write(&f, r#"{"rows": 0, "cols": 0, "ambient": 3, "vertices": []}"#).unwrap();
    let o = qnets(&["laplace", "--in", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(qnets(&["verify", "nonsense"]).status.code(), Some(2));
    assert_eq!(qnets(&["gen", "torus"]).status.code(), Some(2));
    assert_eq!(qnets(&["gen", "qnet", "--tol", "2"]).status.code(), Some(2));
    assert_eq!(qnets(&["laplace", "--in", "/nonexistent/net.json"]).status.code(), Some(2));
}

#[test]
fn cyclide_reports_at_most_n_plus_two_real_generations() {
    let o = qnets(&["cyclide", "--ambient", "3", "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let gens = v["generations"].as_array().expect("generations");
    let real: u64 = gens.iter().map(|g| g["multiplicity"].as_u64().unwrap_or(1)).sum();
    assert!(real <= 5, "{real} real generations");
}
