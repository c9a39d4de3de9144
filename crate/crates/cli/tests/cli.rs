use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use stand_core::trajectories::CharacteristicTimes;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn stand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stand"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,s,n,r,e,h"));
    lines
        .map(|l| l.split(',').map(|x| x.parse().expect("number")).collect())
        .collect()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn with_text(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_zero_keeps_count() {
    let sc = example("regime_i.toml");
    let out = stand(&["simulate", path_str(&sc), "--policy", "zero", "--horizon", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert!(rows.len() > 100);
    assert!(rows.iter().all(|r| r[2] == 1000.0 && r[4] == 0.0));
    assert_eq!(rows.last().unwrap()[0], 10.0);
}

#[test]
fn simulate_esup_ends_at_exit_point() {
    let dir = tempfile::tempdir().unwrap();
    let sc = example("regime_i.toml");
    let times = json(&stand(&["times", path_str(&sc)]));
    let t_cap = times["times"]["t_cap0"].as_f64().unwrap();
    let csv = dir.path().join("esup.csv");
    let out = stand(&[
        "simulate",
        path_str(&sc),
        "--policy",
        "esup",
        "--horizon",
        "80",
        "--out",
        path_str(&csv),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let rows = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    let last = rows.last().unwrap();
    assert!((last[3] - 1.0).abs() <= 1e-6);
    assert!((last[2] - 400.0).abs() <= 1e-6);
    assert!((last[0] - t_cap).abs() <= 1e-4 * t_cap);
    let events: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("esup.events.json")).unwrap()).unwrap();
    assert_eq!(events["completed"], Value::Bool(false));
    assert_eq!(
        events["events"].as_array().unwrap().last().unwrap()["kind"],
        "ExitPoint"
    );
}

#[test]
fn simulate_piecewise_plan_file() {
    let dir = tempfile::tempdir().unwrap();
    let sc_text = std::fs::read_to_string(example("regime_i.toml")).unwrap();
    let sc = with_text(dir.path(), "sc.toml", &sc_text);
    with_text(dir.path(), "plan.toml", "breakpoints = [2.0]\nlevels = [\"max\", 0]\n");
    let out = stand(&["simulate", path_str(&sc), "--policy", "pw:plan.toml", "--horizon", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let last = rows.last().unwrap();
    assert!((last[2] - 800.0).abs() < 1e-9);
}

#[test]
fn invalid_exponent_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(example("regime_i.toml"))
        .unwrap()
        .replace("q = 1.6", "q = 2.5");
    let sc = with_text(dir.path(), "bad.toml", &text);
    let out = stand(&["simulate", path_str(&sc), "--policy", "zero"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1 < q < 2"), "{err}");
    assert!(err.contains("bad.toml:3:"), "{err}");
}

#[test]
fn unknown_policy_and_missing_economics() {
    let dir = tempfile::tempdir().unwrap();
    let sc = example("regime_i.toml");
    assert_eq!(
        stand(&["simulate", path_str(&sc), "--policy", "bogus"]).status.code(),
        Some(1)
    );
    let text = std::fs::read_to_string(&sc).unwrap();
    let cut = text.find("[economics]").unwrap();
    let plain = with_text(dir.path(), "plain.toml", &text[..cut]);
    let out = stand(&["optimize", path_str(&plain)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[economics]"));
}

#[test]
fn times_linear_competition_bounds_coincide() {
    let out = stand(&["times", path_str(&example("theta_zero.toml"))]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["times"]["t_lower"], v["times"]["t_upper"]);
    assert!(v["times"]["t_lower"].as_f64().is_some());
}

#[test]
fn times_small_energy_upper_unreachable() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(example("regime_i.toml"))
        .unwrap()
        .replace("v0 = 2.0", "v0 = 0.01");
    let sc = with_text(dir.path(), "tiny.toml", &text);
    let v = json(&stand(&["times", path_str(&sc)]));
    assert_eq!(v["times"]["t_upper"], "unreachable");
    assert_eq!(v["validity"]["verdict"], "exit_unreachable");
}

#[test]
fn times_output_round_trips() {
    let out = stand(&["times", path_str(&example("regime_ii.toml"))]);
    let v = json(&out);
    let times: CharacteristicTimes<f64> = serde_json::from_value(v["times"].clone()).unwrap();
    assert_eq!(serde_json::to_value(times).unwrap(), v["times"]);
    let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(again, v);
}

#[test]
fn optimize_regime_i_picks_early_cut() {
    let v = json(&stand(&["optimize", path_str(&example("regime_i.toml"))]));
    assert_eq!(v["best_label"], "E0");
    assert_eq!(v["best_policy"]["policy"], "canonical");
    assert_eq!(v["best_policy"]["kind"], "e0");
    let policy: stand_core::Policy64 = serde_json::from_value(v["best_policy"].clone()).unwrap();
    assert_eq!(
        policy.schedule(100.0).unwrap(),
        stand_core::Policy64::Max.schedule(100.0).unwrap()
    );
    assert_eq!(v["condition_report"]["branch"], "e0_optimal");
    assert_eq!(v["candidates_evaluated"], 6561);
}

#[test]
fn optimize_regime_ii_picks_boundary_ride() {
    let v = json(&stand(&["optimize", path_str(&example("regime_ii.toml"))]));
    assert_eq!(v["best_label"], "Esup");
    assert_eq!(v["condition_report"]["branch"], "esup_optimal");
    let v = json(&stand(&[
        "optimize",
        path_str(&example("regime_ii.toml")),
        "--terminal",
    ]));
    assert_eq!(v["best_label"], "ET");
}

#[test]
fn optimize_counts_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cand.csv");
    let out = stand(&[
        "optimize",
        path_str(&example("regime_ii.toml")),
        "--intervals",
        "1",
        "--levels",
        "0,max",
        "--candidates",
        path_str(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["candidates_evaluated"], 2);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
}

#[test]
fn verify_default_scenario_is_clean() {
    let out = stand(&["verify", path_str(&example("fagacees.toml")), "--policies", "100"]);
    let v = json(&out);
    assert_eq!(v["policies_audited"], 100);
    assert_eq!(v["violation_count"], 0, "{}", v["envelope_violations"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_detects_faulty_integrator() {
    let out = stand(&[
        "verify",
        path_str(&example("fagacees.toml")),
        "--policies",
        "20",
        "--inject-fault",
        "0.9",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    for name in ["size_lower_envelope", "count_upper_envelope"] {
        assert!(v["checks"][name]["violations"].as_u64().unwrap() > 0, "{name}");
    }
}

#[test]
fn verify_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sc = example("regime_ii.toml");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        stand(&[
            "verify",
            path_str(&sc),
            "--policies",
            "30",
            "--seed",
            "42",
            "--out",
            path_str(out),
        ]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
