use std::path::Path;
use std::process::{Command, Output};

fn relzk(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relzk"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &[&str] = &["--n", "48", "--k", "22", "--w", "6", "--q", "521"];

#[test]
fn plan_reproduces_the_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = relzk(&["plan", "--json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(plan["n"], 1704);
    assert_eq!(plan["q_exponent"], 23209);
    assert_eq!(plan["R"], 340);
    assert_eq!(plan["F"], 22);

    let o = relzk(&["plan"], dir.path());
    assert!(stdout(&o).contains("340"));
}

#[test]
fn honest_simulation_accepts_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--sim", "--rounds", "30", "--out-dir", "out"];
    args.extend_from_slice(SMALL);
    let o = relzk(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["session_report.json", "rounds.csv", "phase1_hist.csv", "phase2_hist.csv"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    let rows = std::fs::read_to_string(dir.path().join("out/rounds.csv")).unwrap();
    assert_eq!(rows.lines().count(), 31);

    let o = relzk(&["verify-report", "out/session_report.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("reproduced"));
}

#[test]
fn forged_report_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--sim", "--rounds", "10", "--out-dir", "out"];
    args.extend_from_slice(SMALL);
    assert_eq!(relzk(&args, dir.path()).status.code(), Some(0));
    let path = dir.path().join("out/session_report.json");
    let mut report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    report["rounds"][3]["az"] = serde_json::json!("00");
    std::fs::write(&path, serde_json::to_string(&report).unwrap()).unwrap();
    let o = relzk(&["verify-report", "out/session_report.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn cheating_prover_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = relzk(
        &["run", "--sim", "--adversary", "cheat_rotating", "--no-instance", "small", "--rounds", "600"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn every_adversary_is_rejected_on_a_no_instance() {
    let dir = tempfile::tempdir().unwrap();
    for adv in ["cheat_fixed:2", "cheat_rotating", "abort:0.3333", "spooky_relay"] {
        let o = relzk(&["run", "--sim", "--adversary", adv, "--no-instance", "small"], dir.path());
        assert_eq!(o.status.code(), Some(1), "{adv}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn config_file_with_instance_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = relzk(
        &["gen-instance", "--n", "40", "--k", "18", "--w", "5", "--out-dir", "inst"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let config = serde_json::json!({
        "preset": "scenario2",
        "n": 40, "k": 18, "w": 5, "q_exponent": 521,
        "R": 12, "lambda": 0.1,
        "instance": "inst/instance.json",
        "witness": "inst/witness.json"
    });
    std::fs::write(dir.path().join("session.json"), config.to_string()).unwrap();
    let o = relzk(&["run", "--sim", "--config", "session.json", "--out-dir", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/session_report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["R"], 12);
    assert_eq!(report["config"]["D_km"], 9000.0);

    std::fs::write(dir.path().join("bad.json"), r#"{"R": 5, "bogus": 1}"#).unwrap();
    let o = relzk(&["run", "--sim", "--config", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lone_verifier_exits_with_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = relzk(
        &["run", "--role", "v1", "--n", "48", "--k", "22", "--w", "6", "--q", "521", "--connect-timeout-ms", "300"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_writes_one_row_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let o = relzk(&["bench", "--n", "64", "--rounds", "1", "--out-dir", "b"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("b/bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("n,q_exponent,round"));
}
