use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CONFIG: &str = r#"{
  "k": 3, "nt": 4, "l": 8, "l_val": 4, "l_test": 4,
  "label_iterations": 20, "reference_iterations": 30, "iterations": 6,
  "rnn": {"c": 2, "t": 3},
  "train": {"stage1_epochs": 1, "stage2_epochs": 1, "batch_size": 4}
}"#;

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("cfg.json"), CONFIG).unwrap();
        Work { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_wsrnet"))
            .current_dir(self.dir.path())
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn code(&self, args: &[&str]) -> i32 {
        self.run(args).status.code().unwrap()
    }
}

fn gen(w: &Work, name: &str, extra: &[&str]) {
    let mut args = vec!["gen", "--config", "cfg.json", "--out", name];
    args.extend(extra);
    w.ok(&args);
}

fn model_header(path: &Path) -> Value {
    let text = fs::read_to_string(path).unwrap();
    serde_json::from_str(text.lines().next().unwrap()).unwrap()
}

fn csv_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn gen_is_byte_identical_for_a_seed() {
    let w = Work::new();
    gen(&w, "a.jsonl", &[]);
    gen(&w, "b.jsonl", &[]);
    gen(&w, "c.jsonl", &["--seed", "99"]);
    let a = fs::read(w.path("a.jsonl")).unwrap();
    assert_eq!(a, fs::read(w.path("b.jsonl")).unwrap());
    assert_ne!(a, fs::read(w.path("c.jsonl")).unwrap());
    assert!(w.path("a.summary.json").exists());
}

#[test]
fn gen_count_and_split() {
    let w = Work::new();
    gen(
        &w,
        "t.jsonl",
        &["--split", "test", "--count", "2", "--no-labels"],
    );
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(w.path("t.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["l"], 2);
    assert!(summary["label_solver"].is_null());
}

#[test]
fn train_eval_solve_round_trip() {
    let w = Work::new();
    gen(&w, "train.jsonl", &[]);
    gen(&w, "test.jsonl", &["--split", "test"]);
    w.ok(&[
        "train",
        "--config",
        "cfg.json",
        "train.jsonl",
        "--out",
        "m.json",
    ]);
    assert_eq!(model_header(&w.path("m.json"))["training"], "hybrid");
    let log = csv_lines(&w.path("m.train.csv"));
    assert_eq!(log.len(), 1 + 1 + 2);

    let out = w.ok(&[
        "eval",
        "--config",
        "cfg.json",
        "--model",
        "m.json",
        "test.jsonl",
        "--out",
        "e.csv",
    ]);
    assert!(out.contains("rnn-pgp"));
    assert_eq!(csv_lines(&w.path("e.csv")).len(), 4);

    w.ok(&[
        "solve",
        "--config",
        "cfg.json",
        "test.jsonl",
        "--solver",
        "rnn-pgp",
        "--model",
        "m.json",
        "--out",
        "s.csv",
        "--trace",
        "tr.csv",
    ]);
    let rows = csv_lines(&w.path("s.csv"));
    assert_eq!(rows[0], "scheme,instance,iterations,wsr,accuracy,runtime_s");
    assert_eq!(rows.len(), 1 + 4 + 1);
    assert_eq!(csv_lines(&w.path("tr.csv")).len(), 1 + 4 * 4);
    assert!(w.path("s.summary.json").exists());
}

#[test]
fn unsupervised_only_schedule_is_tagged() {
    let w = Work::new();
    gen(&w, "train.jsonl", &["--no-labels"]);
    w.ok(&[
        "train",
        "--config",
        "cfg.json",
        "train.jsonl",
        "--stage1",
        "0",
        "--out",
        "u.json",
    ]);
    assert_eq!(model_header(&w.path("u.json"))["training"], "unsupervised");
}

#[test]
fn training_repeats_for_a_seed() {
    let w = Work::new();
    gen(&w, "train.jsonl", &[]);
    for m in ["a.json", "b.json"] {
        w.ok(&[
            "train",
            "--config",
            "cfg.json",
            "--seed",
            "5",
            "train.jsonl",
            "--out",
            m,
        ]);
    }
    assert_eq!(
        fs::read(w.path("a.json")).unwrap(),
        fs::read(w.path("b.json")).unwrap()
    );
}

#[test]
fn solve_csv_is_reproducible_apart_from_runtime() {
    let w = Work::new();
    gen(&w, "test.jsonl", &["--split", "test"]);
    let strip = |p: &str| -> Vec<String> {
        csv_lines(&w.path(p))
            .iter()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    for out in ["x.csv", "y.csv"] {
        w.ok(&[
            "solve",
            "--config",
            "cfg.json",
            "test.jsonl",
            "--solver",
            "pgp",
            "--out",
            out,
        ]);
    }
    assert_eq!(strip("x.csv"), strip("y.csv"));
}

#[test]
fn sweep_over_antennas() {
    let w = Work::new();
    gen(&w, "train.jsonl", &[]);
    w.ok(&[
        "train",
        "--config",
        "cfg.json",
        "train.jsonl",
        "--out",
        "m.json",
    ]);
    w.ok(&[
        "sweep", "--config", "cfg.json", "--axis", "nt", "--values", "4,6", "--model", "m.json",
        "--out", "sw.csv",
    ]);
    let rows = csv_lines(&w.path("sw.csv"));
    assert_eq!(rows.len(), 1 + 2 * 3);
    assert!(rows[1].starts_with("nt,4"));
}

#[test]
fn invalid_arguments_exit_2() {
    let w = Work::new();
    gen(&w, "test.jsonl", &["--split", "test"]);
    assert_eq!(
        w.code(&[
            "solve",
            "--config",
            "cfg.json",
            "test.jsonl",
            "--solver",
            "newton",
            "--out",
            "o.csv"
        ]),
        2
    );
    assert_eq!(
        w.code(&[
            "solve",
            "--config",
            "cfg.json",
            "test.jsonl",
            "--solver",
            "rnn-pgp",
            "--out",
            "o.csv"
        ]),
        2
    );
    assert_eq!(
        w.code(&[
            "sweep", "--config", "cfg.json", "--axis", "nt", "--values", "4", "--out", "o.csv"
        ]),
        2
    );
    assert_eq!(
        w.code(&["gen", "--config", "cfg.json", "--split", "val", "--out", "g.jsonl"]),
        2
    );
    fs::write(w.path("bad.json"), r#"{"k": 0}"#).unwrap();
    assert_eq!(
        w.code(&["gen", "--config", "bad.json", "--out", "g.jsonl"]),
        2
    );
}

#[test]
fn io_and_format_errors_exit_4() {
    let w = Work::new();
    assert_eq!(
        w.code(&[
            "solve",
            "--config",
            "cfg.json",
            "missing.jsonl",
            "--solver",
            "pgp",
            "--out",
            "o.csv"
        ]),
        4
    );
    fs::write(w.path("junk.jsonl"), "not a dataset\n").unwrap();
    assert_eq!(
        w.code(&[
            "solve",
            "--config",
            "cfg.json",
            "junk.jsonl",
            "--solver",
            "pgp",
            "--out",
            "o.csv"
        ]),
        4
    );
    assert_eq!(
        w.code(&["gen", "--config", "nope.json", "--out", "g.jsonl"]),
        4
    );
}

#[test]
fn diverging_model_exits_3() {
    let w = Work::new();
    gen(&w, "train.jsonl", &[]);
    gen(&w, "test.jsonl", &["--split", "test"]);
    w.ok(&[
        "train",
        "--config",
        "cfg.json",
        "train.jsonl",
        "--out",
        "m.json",
    ]);
    let text = fs::read_to_string(w.path("m.json")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let n = serde_json::from_str::<Vec<f64>>(lines.next().unwrap())
        .unwrap()
        .len();
    let huge = serde_json::to_string(&vec![1e300; n]).unwrap();
    fs::write(w.path("huge.json"), format!("{header}\n{huge}\n")).unwrap();
    assert_eq!(
        w.code(&[
            "solve",
            "--config",
            "cfg.json",
            "test.jsonl",
            "--solver",
            "rnn-pgp",
            "--model",
            "huge.json",
            "--out",
            "o.csv",
        ]),
        3
    );
}
