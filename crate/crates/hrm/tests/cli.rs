//! Runs the `hrm` binary on temporary files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hrm::envs::ground_truth_hrm;
use hrm::machines::save_hrm;
use serde_json::Value;
use tempfile::TempDir;

fn hrm_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrm")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p: PathBuf = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn task_file(dir: &Path, name: &str) -> String {
    write(dir, &format!("{name}.json"), &save_hrm(&ground_truth_hrm(name, false).unwrap()))
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn validate_reports_and_sets_exit_code() {
    let d = TempDir::new().unwrap();
    let book = task_file(d.path(), "Book");
    let o = hrm_cmd(&["validate", &book]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["valid"], true);
    assert_eq!(v["height"], 2);

    let cyclic = r#"{"propositions":["a"],"root":"A","machines":[
        {"id":"A","states":["u0","uA"],"initial":"u0","accepting":["uA"],"edges":[{"from":"u0","to":"uA","call":"B","formula":"true"}]},
        {"id":"B","states":["u0","uA"],"initial":"u0","accepting":["uA"],"edges":[{"from":"u0","to":"uA","call":"A","formula":"true"}]}]}"#;
    let o = hrm_cmd(&["validate", &write(d.path(), "cyc.json", cyclic)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("call cycle"));
}

#[test]
fn flatten_then_equiv_round_trip() {
    let d = TempDir::new().unwrap();
    let book = task_file(d.path(), "Book");
    let flat = d.path().join("flat.json").to_string_lossy().into_owned();
    assert_eq!(code(&hrm_cmd(&["flatten", &book, "--out", &flat])), 0);
    let o = hrm_cmd(&["equiv", &book, &flat, "--exhaustive", "--max-len", "4"]);
    assert_eq!(code(&o), 0);
    let first: Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(first["equivalent"], true);
    let o = hrm_cmd(&["equiv", &book, &flat, "--random", "500", "--max-len", "12", "--seed", "7"]);
    assert_eq!(code(&o), 0);

    let dot = hrm_cmd(&["flatten", &book, "--format", "dot"]);
    assert!(stdout(&dot).starts_with("digraph"));
}

#[test]
fn equiv_mismatch_exits_one_with_witnesses() {
    let d = TempDir::new().unwrap();
    let a = task_file(d.path(), "Bucket");
    let b = task_file(d.path(), "Sugar");
    let o = hrm_cmd(&["equiv", &a, &b, "--max-len", "3"]);
    assert_eq!(code(&o), 1);
    let lines: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[0]["equivalent"], false);
    assert!(lines.len() > 1);
    assert!(lines[1]["trace"].is_array());
}

#[test]
fn size_and_dot() {
    let d = TempDir::new().unwrap();
    let o = hrm_cmd(&["size", "--height", "2", "--machines", "2", "--states", "3", "--edges", "1"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["flat_states"], "5");
    let book = task_file(d.path(), "Book");
    let v: Value = serde_json::from_str(&stdout(&hrm_cmd(&["size", &book]))).unwrap();
    assert_eq!(v["flat_states"], 9);
    assert!(stdout(&hrm_cmd(&["dot", &book])).contains("digraph"));
}

#[test]
fn eval_trace_classifies_each_line() {
    let d = TempDir::new().unwrap();
    let bucket = task_file(d.path(), "Bucket");
    let traces = write(
        d.path(),
        "t.jsonl",
        "{\"labels\":[[\"iron\"],[\"table\"]],\"kind\":\"goal\"}\n{\"labels\":[[\"table\"]],\"kind\":\"incomplete\"}\n",
    );
    let o = hrm_cmd(&["eval-trace", &bucket, &traces]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 2);
    let wrong = write(d.path(), "w.jsonl", "{\"labels\":[[\"table\"]],\"kind\":\"goal\"}\n");
    let o = hrm_cmd(&["eval-trace", &bucket, &wrong]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("\"valid\":false"));
    let bad = write(d.path(), "b.jsonl", "{\"labels\":[[\"gold\"]],\"kind\":\"goal\"}\n");
    assert_eq!(code(&hrm_cmd(&["eval-trace", &bucket, &bad])), 2);
}

#[test]
fn rollout_and_training_are_reproducible() {
    let d = TempDir::new().unwrap();
    let env = write(d.path(), "env.json", r#"{"domain":"craftworld","layout":"OP","seed":1,"max_steps":50}"#);
    let a = hrm_cmd(&["env-rollout", "--env", &env, "--task", "Bucket", "--seed", "3"]);
    let b = hrm_cmd(&["env-rollout", "--env", &env, "--task", "Bucket", "--seed", "3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let first: Value = serde_json::from_str(stdout(&a).lines().next().unwrap()).unwrap();
    assert_eq!(first["t"], 1);

    let q = d.path().join("q.json").to_string_lossy().into_owned();
    let t1 = hrm_cmd(&["train", "--env", &env, "--task", "Bucket", "--episodes", "5", "--checkpoint", &q]);
    let t2 = hrm_cmd(&["train", "--env", &env, "--task", "Bucket", "--episodes", "5"]);
    assert_eq!(code(&t1), 0);
    assert_eq!(t1.stdout, t2.stdout);
    let log = stdout(&t1);
    assert_eq!(log.lines().next().unwrap(), "episode,task,instance,return,steps,verdict");
    assert_eq!(log.lines().count(), 6);
    assert!(fs::metadata(&q).unwrap().len() > 0);
    assert_eq!(code(&hrm_cmd(&["train", "--env", &env, "--task", "Nothing", "--episodes", "1"])), 2);
}

#[test]
fn induce_outputs_a_root_or_exits_one() {
    let d = TempDir::new().unwrap();
    let traces = write(
        d.path(),
        "bucket.jsonl",
        &[
            r#"{"labels":[["iron"],["table"]],"kind":"goal"}"#,
            r#"{"labels":[[],["iron"],[],["table"]],"kind":"goal"}"#,
            r#"{"labels":[["cow"],["iron"],["cow"],["table"]],"kind":"goal"}"#,
            r#"{"labels":[["iron"]],"kind":"incomplete"}"#,
            r#"{"labels":[["table"]],"kind":"incomplete"}"#,
            r#"{"labels":[["table"],["iron"]],"kind":"incomplete"}"#,
            r#"{"labels":[["iron"],["cow"]],"kind":"incomplete"}"#,
        ]
        .join("\n"),
    );
    let out = d.path().join("root.json").to_string_lossy().into_owned();
    let stats = d.path().join("stats.json").to_string_lossy().into_owned();
    let o = hrm_cmd(&["induce", &traces, "--props", "iron,table,cow", "--out", &out, "--stats", &stats]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let root = fs::read_to_string(&out).unwrap();
    assert_eq!(code(&hrm_cmd(&["eval-trace", &out, &traces])), 0);
    let s: Value = serde_json::from_str(&fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(s["num_states"], 3);
    assert_eq!(s["outcome"], "solution");
    assert!(s.get("elapsed_ms").is_none());
    let again = hrm_cmd(&["induce", &traces, "--props", "iron,table,cow"]);
    assert_eq!(stdout(&again), root);

    let o = hrm_cmd(&["induce", &traces, "--props", "iron,table,cow", "--states", "2"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsat"));
    assert_eq!(code(&hrm_cmd(&["induce", &traces])), 2);
}

#[test]
fn lhrm_writes_a_reproducible_run_directory() {
    let d = TempDir::new().unwrap();
    let cfg = write(
        d.path(),
        "run.json",
        r#"{"tasks":["Bucket"],"env":{"domain":"craftworld","layout":"OP","seed":0,"max_steps":300},"max_episodes":400,"eval_every":50}"#,
    );
    let run = |name: &str| {
        let out = d.path().join(name).to_string_lossy().into_owned();
        assert_eq!(code(&hrm_cmd(&["lhrm", "--config", &cfg, "--out", &out, "--seed", "4"])), 0);
        PathBuf::from(out)
    };
    let a = run("a");
    let b = run("b");
    for f in ["manifest.json", "curves.csv", "episodes.csv", "bank/Bucket.json", "bank/Bucket.traces.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["learned"]["Bucket"], true);
    assert_eq!(m["seed"], 4);
    assert_eq!(code(&hrm_cmd(&["validate", &a.join("bank/Bucket.json").to_string_lossy()])), 0);
    assert_eq!(code(&hrm_cmd(&["lhrm", "--config", &cfg])), 2);
}

#[test]
fn unknown_verb_and_missing_files() {
    assert_eq!(code(&hrm_cmd(&["bogus"])), 2);
    assert_eq!(code(&hrm_cmd(&["validate", "/nonexistent/file.json"])), 2);
    assert_eq!(code(&hrm_cmd(&["--help"])), 0);
}
