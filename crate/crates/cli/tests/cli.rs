use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cmahpo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmahpo")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_small(out: &Path, mode: &str) -> Output {
    cmahpo(&[
        "run", "--mode", mode, "--trials", "14", "--repeats", "2", "--seeds", "1,2",
        "--out", out.to_str().unwrap(),
    ])
}

#[test]
fn run_writes_studies_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small(dir.path(), "task");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("seed 1: best"));
    for f in ["summary.txt", "trend_task_1.csv", "trend_task_2.csv", "task_seed1/trials.jsonl", "task_seed2/cma_state.txt"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let log = fs::read_to_string(dir.path().join("task_seed1/trials.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 14);
}

#[test]
fn unknown_mode_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmahpo(&["run", "--mode", "sideways", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown mode"));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn unknown_evaluator_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmahpo(&["run", "--evaluator", "gnn", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown evaluator"));
}

#[test]
fn ttest_from_summaries_and_files() {
    let o = cmahpo(&["ttest", "default=1.1570,0.0700,30", "both=0.8824,0.0417,30"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("t = 18.4592"), "{}", stdout(&o));

    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let o = cmahpo(&["final-eval", "--table-defaults", "--n", "30", "--seed", "4", "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = cmahpo(&["ttest", a.to_str().unwrap(), a.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("t = 0.0000"), "{}", stdout(&o));
}

#[test]
fn final_eval_noise_free_defaults() {
    let o = cmahpo(&["final-eval", "--table-defaults", "--noise-free", "--n", "5", "--label", "default"]);
    assert!(o.status.success());
    let line = stdout(&o);
    let mean: f64 = line.split("mean=").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!((mean - 0.9925).abs() < 1e-12, "{line}");
    assert!(line.trim_end().ends_with("std=0.0000000000000000e0"), "{line}");
    let o = cmahpo(&["final-eval", "--table-defaults", "--n", "1"]);
    assert!(!o.status.success());
}

#[test]
fn export_resume_and_final_eval_of_a_study() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_small(dir.path(), "both").status.success());
    let trend = dir.path().join("trend_both_1.csv");
    fs::remove_file(&trend).unwrap();
    let o = cmahpo(&["export", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(trend.is_file());

    let study = dir.path().join("both_seed2");
    let before = fs::read_to_string(study.join("trials.jsonl")).unwrap();
    let o = cmahpo(&["resume", study.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let strip = |s: &str| -> Vec<String> {
        // wall-clock fields differ between runs
        s.lines().map(|l| l.split("\"wall_time_ms\"").next().unwrap().to_string()).collect()
    };
    assert_eq!(strip(&before), strip(&fs::read_to_string(study.join("trials.jsonl")).unwrap()));

    let o = cmahpo(&["final-eval", "--study", study.to_str().unwrap(), "--n", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
