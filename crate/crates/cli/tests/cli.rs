use std::path::Path;
use std::process::{Command, Output};

use predlearn::agent::Bundle;
use predlearn::world::DomainId;

fn predlearn(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_predlearn"));
    cmd.args(args).env_remove("PREDLEARN_ENDPOINT");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn train(out: &Path, extra: &[&str], env: &[(&str, &str)]) -> Output {
    let mut args =
        vec!["train", "--domain", "store_objects", "--tasks", "10", "--seed", "0", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    predlearn(&args, env)
}

#[test]
fn train_then_eval_combined_passes_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("bundle");
    let o = train(&b, &[], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in
        ["predicates.pscript", "domain.pddl", "preconds.json", "transitions.jsonl", "manifest.json", "session.jsonl"]
    {
        assert!(b.join(f).is_file(), "{f}");
    }
    let report = dir.path().join("report");
    let o = predlearn(
        &[
            "eval",
            "--bundle",
            b.to_str().unwrap(),
            "--suite",
            "combined",
            "--seed",
            "0",
            "--assert",
            "0.9",
            "--out",
            report.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("combined"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["success"]["combined"]["mean"], 1.0);

    let o = predlearn(&["replay", "--log", b.join("session.jsonl").to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().any(|l| l.contains("predicate_registered") && l.contains("obj_graspable")));
}

#[test]
fn an_empty_bundle_fails_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    Bundle::empty(DomainId::StoreObjects).save(dir.path()).unwrap();
    let o =
        predlearn(&["eval", "--bundle", dir.path().to_str().unwrap(), "--suite", "canonical", "--assert", "0.9"], &[]);
    assert_eq!(code(&o), 3);
    let o = predlearn(&["eval", "--bundle", dir.path().to_str().unwrap(), "--suite", "canonical"], &[]);
    assert_eq!(code(&o), 0);
}

#[test]
fn bad_arguments_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    assert_eq!(code(&predlearn(&["eval", "--bundle", missing.to_str().unwrap()], &[])), 2);
    assert_eq!(code(&predlearn(&["train", "--domain", "garden", "--out", "x"], &[])), 2);
    assert_eq!(code(&predlearn(&["frobnicate"], &[])), 2);
    let b = dir.path().join("b");
    Bundle::empty(DomainId::StoreObjects).save(&b).unwrap();
    assert_eq!(code(&predlearn(&["eval", "--bundle", b.to_str().unwrap(), "--suite", "harder"], &[])), 2);
    assert_eq!(code(&predlearn(&["eval", "--bundle", b.to_str().unwrap()], &[("PREDLEARN_PLAN_PROBABILITY", "2")])), 2);
}

#[test]
fn plan_prints_validated_plans() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("bundle");
    assert_eq!(code(&train(&b, &[], &[])), 0);
    let satisfied = dir.path().join("satisfied.pddl");
    std::fs::write(
        &satisfied,
        "(define (problem p) (:domain store_objects) (:objects o1) (:init (obj_on_table o1) (gripper_empty)) (:goal (and (obj_on_table o1))))",
    )
    .unwrap();
    let o = predlearn(&["plan", "--bundle", b.to_str().unwrap(), "--problem", satisfied.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("; 0 steps"));

    let stack = dir.path().join("stack.pddl");
    std::fs::write(
        &stack,
        "(define (problem p) (:domain store_objects) (:objects o1 o2)
           (:init (gripper_empty) (obj_on_table o1) (obj_on_table o2) (obj_clear o1) (obj_clear o2)
                  (obj_graspable o1) (obj_graspable o2) (neg_obj_in_gripper o1) (neg_obj_in_gripper o2)
                  (neg_obj_on_obj o1 o2) (neg_obj_on_obj o2 o1))
           (:goal (and (obj_on_obj o1 o2))))",
    )
    .unwrap();
    let o = predlearn(
        &["plan", "--bundle", b.to_str().unwrap(), "--problem", stack.to_str().unwrap(), "--heuristic", "hmax"],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with('(')).count(), 2, "{out}");
    assert!(out.contains("; 2 steps"));

    let garbage = dir.path().join("garbage.pddl");
    std::fs::write(&garbage, "(define (problem").unwrap();
    assert_eq!(
        code(&predlearn(&["plan", "--bundle", b.to_str().unwrap(), "--problem", garbage.to_str().unwrap()], &[])),
        2
    );
}

#[test]
fn remote_teacher_paths() {
    let dir = tempfile::tempdir().unwrap();
    let mocked = dir.path().join("mocked");
    let o = train(&mocked, &["--teacher", "remote"], &[("PREDLEARN_ENDPOINT", "mock:scripted")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let scripted = dir.path().join("scripted");
    assert_eq!(code(&train(&scripted, &[], &[])), 0);
    let text = |d: &Path| std::fs::read_to_string(d.join("domain.pddl")).unwrap();
    assert_eq!(text(&mocked), text(&scripted));

    // Nothing listens on port 9: a transport error.
    let o = train(
        &dir.path().join("down"),
        &["--teacher", "remote"],
        &[("PREDLEARN_ENDPOINT", "http://127.0.0.1:9/v1/chat/completions"), ("PREDLEARN_TIMEOUT_SECS", "2")],
    );
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}
