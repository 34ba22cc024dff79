//! End-to-end checks of the command-line surface: generation output and the
//! sidecar mask format, training artifacts, report and trace rendering, and
//! the error contract (nonzero exit, single `error:` line on stderr).

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stackrnn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn generate_single_sequence() {
    let out = run(&["generate", "--task", "anbn", "--n", "2"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "aabb\n0001\n");
}

#[test]
fn generate_anbmcnm_with_explicit_split() {
    let out = run(&["generate", "--task", "anbmcnm", "--n", "2", "--m", "1"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "aabccc\n000011\n");
}

#[test]
fn generate_is_seed_deterministic() {
    let a = run(&["generate", "--task", "memorization", "--n", "2", "--seed", "3"]);
    let b = run(&["generate", "--task", "memorization", "--n", "2", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let line = stdout(&a);
    let (word, rest) = line.lines().next().unwrap().split_once('=').unwrap();
    let reversed: String = word.chars().rev().collect();
    assert_eq!(rest, reversed);
}

#[test]
fn generate_addition_is_well_formed() {
    let out = run(&["generate", "--task", "addition", "--n", "4", "--seed", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let line = text.lines().next().unwrap();
    let (lhs, rest) = line.split_once('+').unwrap();
    let (rhs, tail) = rest.split_once('=').unwrap();
    let answer = tail.strip_suffix('.').unwrap();
    let rev: String = answer.chars().rev().collect();
    let x = u64::from_str_radix(lhs, 2).unwrap();
    let y = u64::from_str_radix(rhs, 2).unwrap();
    assert_eq!(x + y, u64::from_str_radix(&rev, 2).unwrap());
    assert_eq!(lhs.len() + rhs.len(), 4);
}

#[test]
fn generate_writes_stream_and_mask_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("stream.txt");
    let out = run(&[
        "generate",
        "--task",
        "anbn",
        "--count",
        "5",
        "--max-n",
        "4",
        "--seed",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stream = std::fs::read_to_string(&out_path).unwrap();
    let mask = std::fs::read_to_string(dir.path().join("stream.txt.mask")).unwrap();
    assert_eq!(stream.len(), mask.len());
    assert!(stream.chars().all(|c| c == 'a' || c == 'b'));
    assert!(mask.chars().all(|c| c == '0' || c == '1'));
}

#[test]
fn unknown_task_fails_with_single_error_line() {
    let out = run(&["generate", "--task", "sorting", "--n", "2"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error: "));
}

fn train_tiny(dir: &Path, seed: &str) -> std::path::PathBuf {
    let ckpt = dir.join(format!("tiny-{seed}.ckpt"));
    let out = run(&[
        "train",
        "--task",
        "anbn",
        "--kind",
        "stack",
        "--hidden",
        "6",
        "--units",
        "2",
        "--restarts",
        "2",
        "--epochs",
        "2",
        "--epoch-tokens",
        "600",
        "--val-tokens",
        "300",
        "--cap",
        "64",
        "--seed",
        seed,
        "--out",
        ckpt.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    ckpt
}

#[test]
fn train_eval_trace_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_tiny(dir.path(), "5");
    assert!(ckpt.exists());
    let log = std::fs::read_to_string(format!("{}.log", ckpt.display())).unwrap();
    assert!(log.contains("# restart 0 seed=5"));
    assert!(log.contains("epoch=0 nmax=2 lr=0.1"));
    assert!(log.contains("# best seed="));

    // evaluation prints the table and writes machine-readable rows
    let csv_path = dir.path().join("report.csv");
    let out = run(&[
        "eval",
        "--model",
        ckpt.to_str().unwrap(),
        "--task",
        "anbn",
        "--max-n",
        "5",
        "--trials",
        "2",
        "--seed",
        "7",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("percent of n correct:"));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("n,trials,correct_trials,n_correct\n"));
    assert_eq!(csv.lines().count(), 6);

    // trace: one row per input token plus a header
    let out = run(&[
        "trace",
        "--model",
        ckpt.to_str().unwrap(),
        "--input",
        "aabb",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().next().unwrap().contains("current"));
    assert!(text.contains("action1"));

    // out-of-vocabulary trace input is rejected cleanly
    let out = run(&["trace", "--model", ckpt.to_str().unwrap(), "--input", "aaxb"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: "));

    // task/checkpoint vocabulary mismatch is rejected
    let out = run(&[
        "eval",
        "--model",
        ckpt.to_str().unwrap(),
        "--task",
        "anbncn",
        "--max-n",
        "3",
    ]);
    assert!(!out.status.success());
}

#[test]
fn eval_honors_rounding_flag() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_tiny(dir.path(), "9");
    let out = run(&[
        "eval",
        "--model",
        ckpt.to_str().unwrap(),
        "--task",
        "anbn",
        "--max-n",
        "4",
        "--rounding",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("rounded controllers"));
}

#[test]
fn text_training_and_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let text_path = dir.path().join("corpus.txt");
    let words = ["the", "cat", "sat", "on", "a", "mat", "dog", "ran"];
    let mut corpus = String::new();
    let mut state = 7u64;
    for _ in 0..3000 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
        corpus.push_str(words[(state >> 33) as usize % words.len()]);
        corpus.push(' ');
    }
    std::fs::write(&text_path, &corpus).unwrap();

    let ckpt = dir.path().join("lm.ckpt");
    let out = run(&[
        "train",
        "--task",
        "text",
        "--text-file",
        text_path.to_str().unwrap(),
        "--kind",
        "stack",
        "--hidden",
        "10",
        "--units",
        "2",
        "--use-r",
        "--restarts",
        "1",
        "--epochs",
        "2",
        "--cap",
        "64",
        "--seed",
        "3",
        "--out",
        ckpt.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("val_entropy_bits="));

    let out = run(&[
        "eval",
        "--model",
        ckpt.to_str().unwrap(),
        "--task",
        "text",
        "--text-file",
        text_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = stdout(&out);
    assert!(line.starts_with("entropy_bits="));
    assert!(line.contains("perplexity="));
}
