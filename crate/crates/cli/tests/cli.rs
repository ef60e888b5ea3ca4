use std::path::Path;
use std::process::{Command, Output};

fn mahb(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mahb"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

#[test]
fn solve_then_replay_matches() {
    let dir = tempfile::tempdir().unwrap();
    let out = mahb(
        &["--seed", "5", "--gain-variance", "power-gain", "--trace", "trace.jsonl", "solve", "--scenario-out", "sc.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let solved = json(&out.stdout);
    let iters = solved["result"]["iterations"].as_u64().unwrap();
    let trace = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count() as u64, iters);
    let first: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    for key in ["iteration", "surrogate", "sum_rate", "sinrs", "lambda", "eta", "centers"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }

    let out = mahb(&["--seed", "5", "replay", "--scenario", "sc.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let replayed = json(&out.stdout);
    assert_eq!(replayed["scenario_hash"], solved["scenario_hash"]);
    assert_eq!(replayed["result"]["final_sum_rate"], solved["result"]["final_sum_rate"]);
}

#[test]
fn sweep_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "--trials", "3", "--gain-variance", "power-gain", "--schemes", "fpa-sub,ma-sub", "--out", out,
            "sweep-power", "--powers=-5,5",
        ]
    };
    for (out, workers) in [("a.csv", "1"), ("b.csv", "2")] {
        let mut a = args(out);
        a.extend(["--workers", workers]);
        let o = mahb(&a, dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("scheme,sweep_value,mean_rate_bps_hz,stderr,trials,mean_iters,mean_seconds\n"));
    assert_eq!(text.lines().count(), 5);
    assert!(dir.path().join("a.trials.csv").exists());
}

#[test]
fn json_format_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.json"),
        r#"{"trials": 5, "schemes": ["fpa-sub"], "scenario": {"gain_variance": "power-gain"},
            "sweep": {"axis": "region", "values": [1.0, 2.0]}}"#,
    )
    .unwrap();
    let out = mahb(&["--config", "exp.json", "--trials", "2", "--format", "json", "sweep-region"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = json(&out.stdout);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["trials"] == 2 && r["scheme"] == "fpa-sub"));
    assert_eq!(rows[0]["sweep_value"], 1.0);
}

#[test]
fn upper_bound_rows_carry_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = mahb(
        &["--trials", "1", "--gain-variance", "power-gain", "--format", "json", "upper-bound", "--grid-points", "2"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = json(&out.stdout);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["scheme"], "upper-bound");
    assert_eq!(rows[1]["grid"]["points_per_axis"], 2);
    assert!(rows[1]["mean_rate_bps_hz"].as_f64() >= rows[0]["mean_rate_bps_hz"].as_f64());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["--trials", "0", "sweep-power"],
        vec!["--schemes", "nope", "sweep-power"],
        vec!["solve", "--scheme", "fpa"],
        vec!["--config", "missing.json", "sweep-power"],
        vec!["upper-bound", "--grid-mode", "joint", "--grid-points", "9", "--grid-budget", "10"],
        vec!["frobnicate"],
    ] {
        let out = mahb(&args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(mahb(&["--help"], dir.path()).status.code(), Some(0));
}
