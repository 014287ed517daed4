//! End-to-end tests of the `railock` binary.

use std::path::Path;
use std::process::{Command, Output};

use railock::generator::{junction, ladder};
use railock::serialize_instance;

fn railock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_railock"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_instance(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn check_junction_is_live_and_writes_plan() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "junction.json", &serialize_instance(&junction()));
    let plan = dir.path().join("plan.json");
    let o = railock(&["check", &inst, "--plan-out", plan.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("LIVE steps=2 time="), "{}", stdout(&o));
    let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(plan).unwrap()).unwrap();
    assert!(!plan["steps"].as_array().unwrap().is_empty());
}

#[test]
fn check_dead_ladder_exits_1_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "l.json", &serialize_instance(&ladder(2, 1.8, 1.0).unwrap()));
    let o = railock(&["check", &inst, "--json"]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "dead");
    assert_eq!(v["algorithm"], 3);
}

#[test]
fn check_step_cap_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "l.json", &serialize_instance(&ladder(2, 1.8, 1.0).unwrap()));
    let o = railock(&["check", &inst, "--algorithm", "1", "--max-steps", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).starts_with("UNKNOWN steps=3"));
}

#[test]
fn check_bad_inputs() {
    assert_eq!(code(&railock(&["check", "missing.json"])), 65);
    let dir = tempfile::tempdir().unwrap();
    let bad = write_instance(dir.path(), "bad.json", "{\"infrastructure\": 1}");
    assert_eq!(code(&railock(&["check", &bad])), 65);
    assert_eq!(code(&railock(&["check", &bad, "--algorithm", "4"])), 64);
    assert_eq!(code(&railock(&["frobnicate"])), 64);
}

#[test]
fn gen_families() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ladder.json");
    let o = railock(&["gen", "ladder", "--stations", "2", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("(16 physical)"));
    let inst = railock::parse_instance(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(railock::generator::physical_route_count(&inst), 16);

    for args in [
        &["gen", "corridor", "--routes", "9", "--train-len", "2.25"][..],
        &["gen", "junction"],
        &["gen", "four-station"],
        &["gen", "random", "--seed", "7"],
    ] {
        let o = railock(args);
        assert_eq!(code(&o), 0, "{args:?}");
        assert!(railock::parse_instance(&stdout(&o)).is_ok(), "{args:?}");
    }
    assert_eq!(code(&railock(&["gen", "ladder", "--stations", "0"])), 64);
    assert_eq!(code(&railock(&["gen", "corridor", "--routes", "1"])), 64);
}

#[test]
fn bench_empty_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = railock(&["bench", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 1, "header only");
}

#[test]
fn bench_table_rows_sorted_with_forced_timeout() {
    let dir = tempfile::tempdir().unwrap();
    write_instance(dir.path(), "b_junction.json", &serialize_instance(&junction()));
    write_instance(dir.path(), "a_ladder100.json", &serialize_instance(&ladder(100, 1.8, 1.0).unwrap()));
    let o = railock(&[
        "bench",
        dir.path().to_str().unwrap(),
        "--algorithms",
        "1",
        "--timeout-s",
        "0.001",
        "--json",
    ]);
    assert_eq!(code(&o), 0);
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rows[0]["instance"], "a_ladder100");
    assert_eq!(rows[0]["runs"][0]["status"], "unknown");
    assert_eq!(rows[0]["n_routes"], 1600);
    assert_eq!(rows[1]["instance"], "b_junction");
}

#[test]
fn bench_reports_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    write_instance(dir.path(), "broken.json", "nope");
    let o = railock(&["bench", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("error"));
}

#[test]
fn dimacs_dump_has_header() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_instance(dir.path(), "j.json", &serialize_instance(&junction()));
    let o = railock(&["dimacs", &inst, "--steps", "2", "--algorithm", "2"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("p cnf ")));
    assert!(text.lines().next().unwrap().starts_with("c goal "));
    assert_eq!(code(&railock(&["dimacs", &inst, "--steps", "0"])), 64);
}
