use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use torus_action::runner::{load_field, FIELD_FILE, REPORT_FILE, TRACE_FILE};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torus-action"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn run(command: &str, cfg: &Path, out: &Path, extra: &[&str]) -> (i32, String) {
    let o = bin()
        .arg(command)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env_remove("TORUS_ACTION_THREADS")
        .output()
        .unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join(REPORT_FILE)).unwrap()).unwrap()
}

#[test]
fn manufactured_config_converges() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run("solve", &config("manufactured.json"), dir.path(), &[]);
    assert_eq!(code, 0);
    let r = report(dir.path());
    assert_eq!(r["status"], "converged");
    assert!(r["residual_inf"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["verdict"], "solvable");
    let trace = std::fs::read_to_string(dir.path().join(TRACE_FILE)).unwrap();
    assert!(trace.starts_with("iter,action,grad_inf,mean_norm\n"));
    let u = load_field(&dir.path().join(FIELD_FILE)).unwrap();
    assert_eq!(u.grid().resolutions(), &[32, 32]);
}

#[test]
fn drift_config_is_a_negative_result() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run("solve", &config("drift.json"), dir.path(), &[]);
    assert_eq!(code, 2);
    let r = report(dir.path());
    assert_eq!(r["solve_status"], "diverged_non_coercive");
    assert_eq!(r["certificate"]["verdict"], "not_solvable");
}

#[test]
fn certify_and_audits_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let tmp = dir.path();
    let strip = |name: &str| {
        let mut v: Value =
            serde_json::from_str(&std::fs::read_to_string(config(name)).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("command");
        let p = tmp.join(name);
        std::fs::write(&p, v.to_string()).unwrap();
        p
    };
    let drift = strip("drift.json");
    let quad = strip("quadratic_form.json");
    assert_eq!(run("certify", &drift, &tmp.join("a"), &[]).0, 2);
    assert_eq!(run("certify", &quad, &tmp.join("b"), &[]).0, 0);
    assert_eq!(report(&tmp.join("b"))["status"], "solvable");
    assert_eq!(run("check-grad", &quad, &tmp.join("c"), &[]).0, 0);
    assert_eq!(run("wirtinger", &quad, &tmp.join("d"), &[]).0, 0);
    assert_eq!(run("oracle-compare", &quad, &tmp.join("e"), &[]).0, 0);
    // oracle-compare needs a quadratic potential
    assert_eq!(
        run(
            "oracle-compare",
            &config("log_sum_exp_fd2.json"),
            &tmp.join("f"),
            &[]
        )
        .0,
        1
    );
}

#[test]
fn invalid_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p0 = dir.path().join("p0.json");
    let text = std::fs::read_to_string(config("drift.json"))
        .unwrap()
        .replace("\"p\": 1", "\"p\": 0");
    std::fs::write(&p0, text).unwrap();
    let (code, _) = run("solve", &p0, &dir.path().join("p0"), &[]);
    assert_eq!(code, 1);
    assert_eq!(report(&dir.path().join("p0"))["status"], "error");

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        "{\n  \"grid\": {\"p\": 1,\n  \"periods\": [1.0], \"resolutions\": [8], \"extra\": 1}\n}",
    )
    .unwrap();
    let (code, stderr) = run("solve", &bad, &dir.path().join("bad"), &[]);
    assert_eq!(code, 1);
    assert!(
        stderr.contains("extra") && stderr.contains("line 3"),
        "{stderr}"
    );

    let (code, stderr) = run(
        "certify",
        &config("manufactured.json"),
        &dir.path().join("m"),
        &[],
    );
    assert_eq!(code, 1);
    assert!(stderr.contains("solve"));

    let (code, _) = run(
        "frobnicate",
        &config("drift.json"),
        &dir.path().join("x"),
        &[],
    );
    assert_eq!(code, 1);
    let (code, _) = run(
        "solve",
        &dir.path().join("missing.json"),
        &dir.path().join("y"),
        &[],
    );
    assert_eq!(code, 1);
}

#[test]
fn seed_override_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("log_sum_exp_fd2.json");
    assert_eq!(
        run(
            "solve",
            &cfg,
            &dir.path().join("a"),
            &["--seed", "9", "--threads", "2"]
        )
        .0,
        0
    );
    assert_eq!(report(&dir.path().join("a"))["seed"], 9);
    assert_eq!(
        run("solve", &cfg, &dir.path().join("b"), &["--threads", "0"]).0,
        1
    );

    let o = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("c"))
        .env("TORUS_ACTION_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("d"))
        .env("TORUS_ACTION_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn report_keys_are_sorted() {
    let dir = tempfile::tempdir().unwrap();
    run("solve", &config("drift.json"), dir.path(), &[]);
    let text = std::fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap();
    let top: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \"") && !l.starts_with("   "))
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    let mut sorted = top.clone();
    sorted.sort();
    assert_eq!(top, sorted);
    assert!(top.contains(&"version") && top.contains(&"wall_time_s") && top.contains(&"config"));
}
