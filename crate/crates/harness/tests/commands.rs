use std::process::Command;

use ndarray::Array2;
use serde_json::Value;

use sr_aif::model::ActionPrecision;
use sr_aif_harness::bench::{cmd_bench, read_csv, to_csv_string};
use sr_aif_harness::checks::{cmd_duality, DualityConfig};
use sr_aif_harness::dump::cmd_dump;
use sr_aif_harness::run::{cmd_run, strip_timing};
use sr_aif_harness::{resolve, AgentKind, ConfigOverrides, HarnessError, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sr-aif"))
}

fn fields(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[test]
fn greedy_sr_always_succeeds_on_3x3() {
    let cfg = RunConfig {
        episodes: 10,
        seed: 7,
        beta: ActionPrecision::Greedy,
        ..RunConfig::default()
    };
    let report = cmd_run(&cfg).unwrap();
    assert_eq!(report.aggregates.success_rate, 1.0);
    assert_eq!(report.episodes.len(), 10);
    assert!(report.warnings.is_empty());
    for ep in &report.episodes {
        let (r, c) = (ep.start / 3, ep.start % 3);
        assert_eq!(ep.steps, (2 - r) + (2 - c));
    }
}

#[test]
fn zero_episodes_is_a_config_error() {
    let cfg = RunConfig {
        episodes: 0,
        ..RunConfig::default()
    };
    assert!(matches!(cmd_run(&cfg), Err(HarnessError::Config { key, .. }) if key == "episodes"));
}

#[test]
fn run_reports_are_reproducible() {
    let cfg = RunConfig {
        grid_size: 4,
        unknowable: [5].into(),
        episodes: 5,
        seed: 3,
        ..RunConfig::default()
    };
    let report = || {
        let mut v = serde_json::to_value(cmd_run(&cfg).unwrap()).unwrap();
        strip_timing(&mut v);
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(report(), report());
}

#[test]
fn singular_discount_is_a_numerical_error() {
    let cfg = RunConfig {
        gamma: 1.0,
        ..RunConfig::default()
    };
    let err = cmd_run(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("adjust gamma"));
}

#[test]
fn bench_cross_product_and_setup_time() {
    let cfg = RunConfig {
        sizes: vec![3, 5],
        episodes: 5,
        horizon: 3,
        ..RunConfig::default()
    };
    let records = cmd_bench(&cfg).unwrap();
    assert_eq!(records.len(), 20);
    for n in [3, 5] {
        let sr: Vec<_> = records
            .iter()
            .filter(|r| r.grid_size == n && r.agent == AgentKind::Sr)
            .collect();
        assert_eq!(sr.len(), 5);
        assert!(sr[0].setup_time_ms > 0.0);
        assert!(sr.iter().all(|r| r.setup_time_ms == sr[0].setup_time_ms));
        assert!(records
            .iter()
            .filter(|r| r.grid_size == n && r.agent == AgentKind::Planner)
            .all(|r| r.setup_time_ms == 0.0));
    }
    assert!(records.iter().all(|r| r.error.is_none() && r.wall_time_ms >= 0.0));
    let mut sorted = records.clone();
    sorted.sort_by_key(|r| (r.grid_size, r.agent, r.episode));
    assert_eq!(sorted, records);
}

#[test]
fn bench_csv_round_trips_at_printed_precision() {
    let cfg = RunConfig {
        sizes: vec![3],
        episodes: 4,
        horizon: 2,
        ..RunConfig::default()
    };
    let text = to_csv_string(&cmd_bench(&cfg).unwrap()).unwrap();
    let parsed = read_csv(text.as_bytes()).unwrap();
    assert_eq!(to_csv_string(&parsed).unwrap(), text);
    assert_eq!(read_csv(text.as_bytes()).unwrap(), parsed);
}

#[test]
fn bench_records_failures_per_cell() {
    let cfg = RunConfig {
        sizes: vec![3, 4],
        agents: vec![AgentKind::Sr],
        episodes: 2,
        sr_gamma: Some(1.0),
        ..RunConfig::default()
    };
    let records = cmd_bench(&cfg).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records
        .iter()
        .all(|r| r.error.as_deref().is_some_and(|e| e.contains("singular"))));
}

fn matrix(v: &Value) -> Array2<f64> {
    let (r, c) = (
        v["rows"].as_u64().unwrap() as usize,
        v["cols"].as_u64().unwrap() as usize,
    );
    let data = v["data"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|row| row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()))
        .collect();
    Array2::from_shape_vec((r, c), data).unwrap()
}

#[test]
fn dump_default_b_is_column_stochastic() {
    let dump = cmd_dump(&RunConfig::default(), &fields(&["default_b"])).unwrap();
    let b = matrix(&dump["fields"]["default_b"]);
    assert_eq!(b.dim(), (9, 9));
    for col in b.columns() {
        assert!((col.sum() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn dump_entropy_marks_unknowable_cells() {
    let cfg = RunConfig {
        unknowable: [1, 4].into(),
        ..RunConfig::default()
    };
    let dump = cmd_dump(&cfg, &fields(&["entropy"])).unwrap();
    let ln3 = 3f64.ln();
    let grid = &dump["fields"]["entropy"]["grid"];
    let expect = [[0.0, ln3, 0.0], [0.0, ln3, 0.0], [0.0, 0.0, 0.0]];
    for (r, row) in expect.iter().enumerate() {
        for (c, want) in row.iter().enumerate() {
            assert!((grid[r][c].as_f64().unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn dump_epistemic_value_dominates_utility_value() {
    let cfg = RunConfig {
        unknowable: [1, 4].into(),
        ..RunConfig::default()
    };
    let dump = cmd_dump(&cfg, &fields(&["efe_value", "utility_value", "state_value"])).unwrap();
    let values = |name: &str| -> Vec<f64> {
        dump["fields"][name]["values"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect()
    };
    let (efe, util) = (values("efe_value"), values("utility_value"));
    assert_eq!(efe, values("state_value"));
    assert!(efe.iter().zip(&util).all(|(e, u)| e - u > 0.0));
}

#[test]
fn dump_rejects_unknown_fields() {
    let err = cmd_dump(&RunConfig::default(), &fields(&["policy"])).unwrap_err();
    assert!(matches!(err, HarnessError::UnknownField(ref f) if f == "policy"));
}

#[test]
fn duality_passes_on_random_instances() {
    let report = cmd_duality(&DualityConfig::default()).unwrap();
    assert!(report.all_passed);
    assert_eq!(report.equivalence.total, 200);
    assert!(report.jensen_equality.max_discrepancy <= 1e-12);
    assert!(report.failure().is_none());
}

#[test]
fn file_then_flags_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"grid_size": 4, "gamma": 0.99, "agent": "planner"}"#).unwrap();
    let flags = ConfigOverrides {
        gamma: Some(0.9),
        ..Default::default()
    };
    let cfg = resolve(Some(&path), &flags).unwrap();
    assert_eq!(
        (cfg.grid_size, cfg.gamma, cfg.agent),
        (4, 0.9, AgentKind::Planner)
    );
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();
    assert_eq!(code(&["run", "--episodes", "2"]), Some(0));
    assert_eq!(code(&["run", "--episodes", "0"]), Some(1));
    assert_eq!(code(&["run", "--agent", "unknown"]), Some(1));
    assert_eq!(code(&["run", "--gamma", "1"]), Some(2));
    assert_eq!(code(&["dump", "--what", "nope"]), Some(1));
    assert_eq!(code(&["duality", "--trials", "20"]), Some(0));
    assert_eq!(code(&["duality", "--trials", "0"]), Some(1));
}

#[test]
fn cli_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"grid_size": 3, "agent": "sr", "beta": "greedy"}"#).unwrap();
    let report = dir.path().join("run.json");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--episodes", "3", "--seed", "7", "--out"])
        .arg(&report)
        .status()
        .unwrap();
    assert!(status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["config"]["episodes"], 3);
    assert_eq!(v["config"]["beta"], "greedy");
    assert_eq!(v["aggregates"]["success_rate"], 1.0);
    assert!(v["seed_derivation"].as_str().unwrap().contains("splitmix64"));

    let csv = dir.path().join("bench.csv");
    let status = bin()
        .args([
            "bench",
            "--sizes",
            "3",
            "--agent",
            "sr",
            "--episodes",
            "2",
            "--out",
        ])
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(
        "grid_size,agent,episode,seed,steps,total_reward,reached_goal,wall_time_ms,setup_time_ms"
    ));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn bad_config_file_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"agent": "unknown"}"#).unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`agent`"));
}
