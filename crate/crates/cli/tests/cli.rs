use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_holonomy-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn check<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("missing check {name}"))
}

fn temp_path(name: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("holonomy-lab-{}-{name}", std::process::id()))
}

#[test]
fn tetrahedral_group_report() {
    let out = run(&["group", "--kind", "tetrahedral"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "group");
    assert_eq!(r["config"]["kind"], "tetrahedral");
    assert_eq!(check(&r, "group.order")["details"]["order"], 12);
    assert_eq!(check(&r, "group.exceptional_count")["details"]["count"], 14);
    assert_eq!(check(&r, "group.partition_sum")["details"]["sum"], 11);
    assert!(r["timing"]["timestamp"].is_string() || r["timing"]["timestamp"].is_number());
}

#[test]
fn flatness_cyclic_three() {
    let out = run(&["flatness", "--kind", "cyclic", "--N", "3", "--samples", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let samples = check(&r, "flatness.samples");
    assert_eq!(samples["status"], "pass");
    assert_eq!(samples["details"]["samples"], 10);
    assert_eq!(samples["details"]["nonzero_samples"], 0);
    assert_eq!(check(&r, "flatness.grid_certificate")["status"], "pass");
    assert_eq!(check(&r, "flatness.negative_control")["status"], "pass");
}

#[test]
fn dims_csv_rows() {
    let out = run(&["dims", "--format", "csv", "--D", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["degree,free_dim,ideal_rank,dim", "1,4,0,4", "2,6,3,3", "3,20,12,8"]);
}

#[test]
fn csv_rejected_for_other_commands() {
    let out = run(&["group", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_configuration_exits_two() {
    assert_eq!(run(&["group", "--kind", "cubic"]).status.code(), Some(2));
    assert_eq!(run(&["dims", "--D", "9"]).status.code(), Some(2));
    assert_eq!(run(&["monodromy", "--steps", "10"]).status.code(), Some(2));
    assert_eq!(run(&["group", "--config", "/nonexistent/holonomy.conf"]).status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    let out = run(&["monodromy", "--steps", "64"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert!(r["checks"].as_array().unwrap().iter().any(|c| c["status"] == "fail"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn config_file_with_flag_override() {
    let path = temp_path("run.conf");
    std::fs::write(&path, "# dihedral run\nkind = dihedral\nN = 4\nseed: 7\n").unwrap();
    let out = run(&["group", "--config", path.to_str().unwrap(), "--N", "5"]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["config"]["kind"], "dihedral");
    assert_eq!(r["config"]["N"], 5);
    assert_eq!(r["config"]["seed"], 7);
    assert_eq!(check(&r, "group.order")["details"]["order"], 10);
}

#[test]
fn out_flag_writes_file() {
    let path = temp_path("report.json");
    let out = run(&["lemma", "--samples", "5", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    let r: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(r["command"], "lemma");
    assert_eq!(check(&r, "lemma.first_identity")["status"], "pass");
}

#[test]
fn thread_count_does_not_change_results() {
    let strip = |out: Output| {
        let mut v = report(&out);
        v.as_object_mut().unwrap().remove("timing");
        v
    };
    let one = strip(bin().args(["flatness", "--samples", "8"]).env("HOLONOMY_LAB_THREADS", "1").output().unwrap());
    let four = strip(bin().args(["flatness", "--samples", "8"]).env("HOLONOMY_LAB_THREADS", "4").output().unwrap());
    assert_eq!(one, four);
    let bad = bin().args(["group"]).env("HOLONOMY_LAB_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
