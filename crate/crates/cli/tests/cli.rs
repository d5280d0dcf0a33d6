use std::path::Path;
use std::process::{Command, Output};

fn fairlos(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairlos"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const SMALL_RUN: &str = r#"{
  "cohort": {"kind": "synthetic", "config": {"n_patients": 300}},
  "sex": "male",
  "learner": {"kind": "logreg"},
  "repeats": 2,
  "seed": 5
}"#;

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        ok(&fairlos(
            dir.path(),
            &["generate", "--patients", "200", "--seed", "9", "--out", name],
        ));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert!(a.starts_with(b"ADMISSION_ID,PATIENT_ID,"));
}

#[test]
fn step_by_step_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&fairlos(
        p,
        &[
            "generate",
            "--patients",
            "400",
            "--biased",
            "--seed",
            "2",
            "--out",
            "c.csv",
        ],
    ));
    ok(&fairlos(p, &["stats", "--in", "c.csv", "--out", "o"]));
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("o/stats.json")).unwrap()).unwrap();
    assert_eq!(stats["sexes"][0]["sex"], "Male");
    ok(&fairlos(
        p,
        &["prepare", "--in", "c.csv", "--sex", "male", "--out", "o"],
    ));
    ok(&fairlos(
        p,
        &[
            "train",
            "--train",
            "o/male/train.csv",
            "--learner",
            "logreg",
            "--out",
            "o",
        ],
    ));
    ok(&fairlos(
        p,
        &[
            "evaluate",
            "--model",
            "o/model.json",
            "--test",
            "o/male/test.csv",
            "--out",
            "o",
        ],
    ));
    let groups = std::fs::read_to_string(p.join("o/groups.csv")).unwrap();
    assert!(groups.lines().last().unwrap().starts_with("range,"));
    for method in ["eg", "threshold"] {
        ok(&fairlos(
            p,
            &[
                "mitigate",
                "--method",
                method,
                "--iters",
                "3",
                "--train",
                "o/male/train.csv",
                "--test",
                "o/male/test.csv",
                "--out",
                "o",
            ],
        ));
    }
    assert!(p.join("o/eg_ensemble.json").is_file());
    assert!(p.join("o/threshold_policy.json").is_file());
}

#[test]
fn report_and_repeat_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("run.json"), SMALL_RUN).unwrap();
    ok(&fairlos(p, &["report", "--config", "run.json", "--out", "a"]));
    ok(&fairlos(p, &["report", "--config", "run.json", "--out", "b"]));
    let a = std::fs::read(p.join("a/report.json")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b/report.json")).unwrap());
    for f in [
        "performance.csv",
        "groups_male.csv",
        "roc_male.svg",
        "los_boxplot_male.svg",
    ] {
        assert!(p.join("a").join(f).is_file(), "{f}");
    }
    ok(&fairlos(p, &["report", "--from", "a/report.json", "--out", "c"]));
    assert_eq!(a, std::fs::read(p.join("c/report.json")).unwrap());

    ok(&fairlos(
        p,
        &["repeat", "--config", "run.json", "--same-seed", "--out", "r"],
    ));
    let text = std::fs::read_to_string(p.join("r/repeat.json")).unwrap();
    let repeat: serde_json::Value = serde_json::from_str(&text).unwrap();
    for m in repeat["sexes"][0]["summary"].as_array().unwrap() {
        assert_eq!(m["std"], 0.0);
    }
}

#[test]
fn failures_exit_nonzero_with_stage_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = fairlos(dir.path(), &["train", "--train", "missing.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("train stage failed"));

    std::fs::write(dir.path().join("bad.json"), r#"{"repeats": 0}"#).unwrap();
    let out = fairlos(dir.path(), &["report", "--config", "bad.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("config stage failed"));
}
