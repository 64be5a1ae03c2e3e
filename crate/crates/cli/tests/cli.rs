use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fepheal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fepheal")).args(args).output().expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run_crash(out: &Path) -> Output {
    let s = scenario("crash_injection.toml");
    fepheal(&[
        "run",
        "--scenario",
        s.to_str().unwrap(),
        "--rounds",
        "8",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ])
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_report_and_replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run_crash(&out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.toml", "scenario.toml", "logs.jsonl", "traces.jsonl", "decisions.jsonl", "summary.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }

    let text = fepheal(&["report", "--in", out.to_str().unwrap()]);
    assert_eq!(text.status.code(), Some(0));
    assert!(!stdout(&text).is_empty());

    let json = fepheal(&["report", "--in", out.to_str().unwrap(), "--format", "json"]);
    assert_eq!(json.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&json)).expect("report emits json");
    assert!(summary.is_object());

    let replay = fepheal(&["replay", "--in", out.to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(0), "{}", stdout(&replay));
    assert!(stdout(&replay).starts_with("replay: pass"));
}

#[test]
fn replay_divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(run_crash(&out).status.code(), Some(0));
    let rounds: Vec<PathBuf> = fs::read_dir(out.join("rounds"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    let target = rounds.iter().max().unwrap().join("beliefs.jsonl");
    let mut bytes = fs::read(&target).unwrap();
    bytes[1] ^= 0x01;
    fs::write(&target, bytes).unwrap();

    let o = fepheal(&["replay", "--in", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let line = stdout(&o);
    assert!(line.starts_with("replay: FAIL at "), "{line}");
    assert!(line.contains("beliefs.jsonl"), "{line}");
}

#[test]
fn invalid_hyperparameter_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let s = scenario("nominal.toml");
    let o = fepheal(&["run", "--scenario", s.to_str().unwrap(), "--out", out.to_str().unwrap(), "--k", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.join("decisions.jsonl").exists());
}

#[test]
fn usage_error_exits_one() {
    assert_eq!(fepheal(&["run", "--rounds", "many"]).status.code(), Some(1));
    assert_eq!(fepheal(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(fepheal(&["--help"]).status.code(), Some(0));
}

#[test]
fn report_on_an_empty_directory_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = fepheal(&["report", "--in", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn replay_without_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = fepheal(&["replay", "--in", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
