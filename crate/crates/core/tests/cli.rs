use std::path::Path;
use std::process::{Command, Output};

fn sesame(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sesame"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn builtin_text(name: &str) -> String {
    std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("scenarios")
            .join(format!("{name}.toml")),
    )
    .unwrap()
}

#[test]
fn list_prints_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let out = sesame(&["list"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    for n in [
        "t61like",
        "n85like",
        "n900like",
        "dvs_flip",
        "workload_switch",
        "control",
        "quadratic",
        "linear_noiseless",
    ] {
        assert!(names.iter().any(|l| l == n), "{n} missing from {names:?}");
    }
}

#[test]
fn run_writes_report_into_default_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = sesame(&["run", "n85like", "--rate-grid", "1,0.1"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(dir.path().join("out/n85like/report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "rate_hz,estimator,rms_rel_error,accuracy");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,interface,") && lines[2].starts_with("0.1,interface,"));
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/n85like/run.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["seed"], 85);
}

#[test]
fn seed_override_is_deterministic_and_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let read = |sub: &str, seed: &str| {
        let out = sesame(
            &["run", "quadratic", "--seed", seed, "--out", sub],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0));
        std::fs::read(dir.path().join(sub).join("report.csv")).unwrap()
    };
    let a = read("a", "3");
    assert_eq!(a, read("b", "3"));
    assert_ne!(a, read("c", "4"));
}

#[test]
fn adaptation_run_writes_logs_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = sesame(
        &["run", "control", "--out", "c", "--threshold", "0.5"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let c = dir.path().join("c");
    let adaptation = std::fs::read_to_string(c.join("adaptation.csv")).unwrap();
    assert!(adaptation.starts_with("t_s,window_error,rebuild_flag\n"));
    let log = std::fs::read_to_string(c.join("decision_log.csv")).unwrap();
    assert!(log.starts_with("t_s,window_error,threshold,action\n"));
    assert!(log
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("0.5")));
    assert!(c.join("model_table.json").exists());
}

#[test]
fn unknown_scenario_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = sesame(&["run", "no_such_scenario"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_scenario_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "name = \"bad\"\nexperiment = \"molding\"\ntrain_s = [\n",
    )
    .unwrap();
    let out = sesame(&["run", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line"), "{err}");
}

#[test]
fn invalid_override_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let out = sesame(&["run", "t61like", "--tlow", "20"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn short_training_span_is_insufficient_data() {
    let dir = tempfile::tempdir().unwrap();
    let text = builtin_text("linear_noiseless").replace("train_s = 4000.0", "train_s = 300.0");
    let path = dir.path().join("short.toml");
    std::fs::write(&path, text).unwrap();
    let out = sesame(
        &["run", path.to_str().unwrap(), "--out", "short"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sesame(&["run"], dir.path()).status.code(), Some(1));
    assert_eq!(sesame(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(
        sesame(&["run", "t61like", "--seed", "x"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(sesame(&["--help"], dir.path()).status.code(), Some(0));
}
