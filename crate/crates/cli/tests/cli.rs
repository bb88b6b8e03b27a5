use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn coach(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coach"))
        .args(args)
        .env_remove("COACH_CONFIG")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut args = vec!["generate", "--out", p(&out)];
    args.extend_from_slice(extra);
    let o = coach(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn report(json: &[u8]) -> serde_json::Value {
    serde_json::from_slice(json).expect("report is JSON")
}

fn count_commands(log: &str, pred: impl Fn(&serde_json::Value) -> bool) -> usize {
    log.lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["type"] == "command" && pred(&v["payload"]))
        .count()
}

#[test]
fn generate_prints_summary_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let flags = ["--exercise", "shoulder_press", "--reps", "5", "--seed", "7"];
    let a = dir.path().join("a.trace");
    let o = coach(&[&["generate", "--out", p(&a)][..], &flags[..]].concat());
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(
        stdout.contains("shoulder_press: 5 planted reps"),
        "{stdout}"
    );
    let b = generate(dir.path(), "b.trace", &flags);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let rep_starts = fs::read_to_string(&a)
        .unwrap()
        .lines()
        .filter(|l| l.contains("\"rep_start\""))
        .count();
    assert_eq!(rep_starts, 5);
}

#[test]
fn zero_reps_is_a_parameter_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = coach(&[
        "generate",
        "--reps",
        "0",
        "--out",
        p(&dir.path().join("x.trace")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("reps"));
}

#[test]
fn simulate_turn_based_versus_low_stimulus() {
    let dir = tempfile::tempdir().unwrap();
    let trace = generate(dir.path(), "t.trace", &["--seed", "3"]);
    let log = dir.path().join("turn.log");
    let o = coach(&[
        "simulate",
        "--trace",
        p(&trace),
        "--out",
        p(&log),
        "--policy",
        "turn-based",
        "--exercise",
        "shoulder_press",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o.stdout);
    assert_eq!(r["exercises"][0]["detected_correct"], 5);
    assert_eq!(r["command_log"], p(&log));
    let text = fs::read_to_string(&log).unwrap();
    assert_eq!(count_commands(&text, |c| c["provenance"] == "feedback"), 5);
    assert_eq!(count_commands(&text, |c| c["kind"] == "mirror"), 0);

    let quiet = dir.path().join("quiet.log");
    let o = coach(&[
        "simulate",
        "--trace",
        p(&trace),
        "--out",
        p(&quiet),
        "--policy",
        "low-stimulus",
        "--exercise",
        "shoulder_press",
    ]);
    assert!(o.status.success());
    let r = report(&o.stdout);
    assert_eq!(r["exercises"][0]["detected_correct"], 5);
    assert_eq!(r["feedback_commands"], 0);
    let text = fs::read_to_string(&quiet).unwrap();
    assert_eq!(count_commands(&text, |c| c["provenance"] == "feedback"), 0);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let trace = generate(
        dir.path(),
        "t.trace",
        &[
            "--noise-joints",
            "0.01",
            "--noise-pixels",
            "1",
            "--seed",
            "9",
        ],
    );
    let logs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let log = dir.path().join(format!("{i}.log"));
            let o = coach(&[
                "simulate",
                "--trace",
                p(&trace),
                "--out",
                p(&log),
                "--policy",
                "mimicking",
            ]);
            assert!(o.status.success());
            fs::read(&log).unwrap()
        })
        .collect();
    assert!(!logs[0].is_empty());
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn malformed_trace_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let trace = generate(dir.path(), "t.trace", &[]);
    let mut text = fs::read_to_string(&trace).unwrap();
    text.push_str(
        "{\"t\":999.0,\"type\":\"skeleton\",\"payload\":{\"joints\":{\"tail\":[0,0,0]}}}\n",
    );
    fs::write(&trace, text).unwrap();
    let o = coach(&[
        "simulate",
        "--trace",
        p(&trace),
        "--out",
        p(&dir.path().join("s.log")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let o = coach(&["evaluate", "--trace", p(&dir.path().join("missing.trace"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_errors_exit_with_two_and_env_fallback_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let trace = generate(dir.path(), "t.trace", &[]);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[session]\nreps_per_exercise = 0\n").unwrap();
    let log = dir.path().join("s.log");
    let o = coach(&[
        "simulate",
        "--trace",
        p(&trace),
        "--out",
        p(&log),
        "--config",
        p(&bad),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = Command::new(env!("CARGO_BIN_EXE_coach"))
        .args(["simulate", "--trace", p(&trace), "--out", p(&log)])
        .env("COACH_CONFIG", &bad)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    let good = dir.path().join("good.toml");
    fs::write(
        &good,
        "[session]\nexercises = [\"shoulder_press\"]\npolicy = \"low_stimulus\"\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_coach"))
        .args(["simulate", "--trace", p(&trace), "--out", p(&log)])
        .env("COACH_CONFIG", &good)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(report(&o.stdout)["policy"], "low_stimulus");

    let o = coach(&[
        "simulate",
        "--trace",
        p(&trace),
        "--out",
        p(&log),
        "--policy",
        "chatty",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_writes_report_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let trace = generate(
        dir.path(),
        "t.trace",
        &["--exercise", "side_lateral_raise", "--reps", "3"],
    );
    let out = dir.path().join("report.json");
    let metrics = dir.path().join("metrics.csv");
    let o = coach(&[
        "evaluate",
        "--trace",
        p(&trace),
        "--out",
        p(&out),
        "--metrics",
        p(&metrics),
        "--exercise",
        "side_lateral_raise",
        "--reps",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&fs::read(&out).unwrap());
    assert_eq!(r["exercises"][0]["recall"], 1.0);
    assert!(r["head_pose"]["max_error_deg"].as_f64().unwrap() < 0.1);
    let csv = fs::read_to_string(&metrics).unwrap();
    assert!(csv.starts_with("metric,value,unit\n"));
    assert!(csv.contains("side_lateral_raise.recall,1,ratio"));
    assert!(csv.contains("latency.p99,"));
}

#[test]
fn evaluate_rejects_unannotated_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = generate(dir.path(), "t.trace", &[]);
    let bare: String = fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("\"type\":\"annotation\""))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&trace, bare).unwrap();
    let o = coach(&["evaluate", "--trace", p(&trace)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("annotations"));
}
