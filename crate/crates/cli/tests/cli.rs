use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn swapsched(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swapsched"))
        .current_dir(dir)
        .env_remove("SWAPSCHED_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Small scenario, fast enough for debug builds.
const SMALL: &[&str] = &["--history-hours", "48", "--hours", "12"];

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().chain(SMALL).copied().collect()
}

#[test]
fn generate_two_days_has_48_rows_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let res = swapsched(
            dir.path(),
            &["generate", "--days", "2", "--seed", "9", "-o", out],
        );
        assert!(res.status.success(), "{}", stderr(&res));
    }
    let a = fs::read_to_string(dir.path().join("a/demand.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("b/demand.csv")).unwrap();
    assert_eq!(a, b);
    let rows = a
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("hour"))
        .count();
    assert_eq!(rows, 48);
    assert!(dir.path().join("a/topology.txt").is_file());
}

#[test]
fn generate_rejects_invalid_params() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "[traffic.synthetic]\nnoise = 1.5\n",
    )
    .unwrap();
    let res = swapsched(dir.path(), &["generate", "-c", "bad.toml"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("noise"), "{}", stderr(&res));
    assert!(res.stdout.is_empty());
}

#[test]
fn zero_demand_run_reports_no_loss() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("hour,series_0,series_1,series_2\n");
    for h in 0..30 {
        csv.push_str(&format!("{h},0,0,0\n"));
    }
    fs::write(dir.path().join("zero.csv"), csv).unwrap();
    fs::write(dir.path().join("topo.txt"), "A,B\nB,C\n").unwrap();
    let res = swapsched(
        dir.path(),
        &[
            "run",
            "--topology",
            "topo.txt",
            "--demand",
            "zero.csv",
            "--history-hours",
            "24",
            "--hours",
            "6",
        ],
    );
    assert!(res.status.success(), "{}", stderr(&res));
    let summary = json(&res);
    assert_eq!(summary["lost_ratio"], 0.0);
    assert_eq!(summary["total_lost"], 0);
}

#[test]
fn oracle_over_full_window_matches_hindsight() {
    let dir = tempfile::tempdir().unwrap();
    let res = swapsched(
        dir.path(),
        &[
            "run",
            "--forecaster",
            "oracle",
            "--h",
            "4",
            "--hours",
            "4",
            "--history-hours",
            "24",
            "--seed",
            "3",
        ],
    );
    assert!(res.status.success(), "{}", stderr(&res));
    let summary = json(&res);
    assert_eq!(summary["relative_to_oracle"], 1.0);
    assert_eq!(summary["total_lost"], summary["hindsight_lost"]);
}

#[test]
fn missing_topology_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = swapsched(dir.path(), &["run", "--topology", "no/such/topo.txt"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("no/such/topo.txt"));
}

#[test]
fn run_trace_round_trips_through_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let res = swapsched(dir.path(), &with_small(&["run", "-o", "out"]));
    assert!(res.status.success(), "{}", stderr(&res));
    let run = json(&res);
    let res = swapsched(dir.path(), &["inspect-trace", "out/trace.csv"]);
    assert!(res.status.success(), "{}", stderr(&res));
    let inspect = json(&res);
    assert_eq!(inspect["total_lost"], run["total_lost"]);
    assert_eq!(inspect["total_demand"], run["total_demand"]);
    assert_eq!(inspect["hours"], 12);
    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/metrics.json")).unwrap())
            .unwrap();
    assert_eq!(saved, run);
}

#[test]
fn inspect_missing_trace_fails_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let res = swapsched(dir.path(), &["inspect-trace", "absent.csv"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn horizon_sweep_covers_six_values_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let res = swapsched(
            dir.path(),
            &with_small(&["sweep", "--axis", "horizon", "-o", out]),
        );
        assert!(res.status.success(), "{}", stderr(&res));
    }
    let a = fs::read(dir.path().join("a/results.csv")).unwrap();
    let b = fs::read(dir.path().join("b/results.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut values: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    values.dedup();
    assert_eq!(values, ["1", "2", "3", "4", "5", "6"]);
    let plot: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/plot.json")).unwrap()).unwrap();
    assert_eq!(plot["axis"], "horizon");
}

#[test]
fn empty_sweep_values_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = swapsched(
        dir.path(),
        &["sweep", "--axis", "inventory", "--values", ""],
    );
    assert_eq!(res.status.code(), Some(2));
    let res = swapsched(dir.path(), &["sweep", "--axis", "sideways"]);
    assert_eq!(res.status.code(), Some(2));
    let res = swapsched(dir.path(), &["sweep", "--axis", "horizon", "--values", "9"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn config_file_sections_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
seed = 5
history_hours = 48
test_hours = 12

[topology]
kind = "ring"
n = 4

[fleet]
inventory_level = 0.9
mobile_ratio = 0.3

[sweep]
axis = "inventory"
values = [0.6, 0.9]
repetitions = 2

[output]
dir = "from-config"
"#;
    fs::write(dir.path().join("exp.toml"), config).unwrap();
    let res = swapsched(dir.path(), &["sweep", "-c", "exp.toml"]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = fs::read_to_string(dir.path().join("from-config/results.csv")).unwrap();
    // 2 values x 2 seeds x (hindsight + 4 rolling policies)
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 5);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("5") || l.split(',').nth(2) == Some("6")));

    let res = swapsched(
        dir.path(),
        &["sweep", "-c", "exp.toml", "--values", "0.75", "-o", "flag"],
    );
    assert!(res.status.success(), "{}", stderr(&res));
    let text = fs::read_to_string(dir.path().join("flag/results.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.starts_with("0.75,")));

    fs::write(dir.path().join("typo.toml"), "sede = 3\n").unwrap();
    let res = swapsched(dir.path(), &["run", "-c", "typo.toml"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn output_directory_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let res = Command::new(env!("CARGO_BIN_EXE_swapsched"))
        .current_dir(dir.path())
        .env("SWAPSCHED_OUT", "env-out")
        .args(["generate", "--days", "1"])
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(dir.path().join("env-out/demand.csv").is_file());
}
