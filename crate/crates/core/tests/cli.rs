use std::path::Path;
use std::process::{Command, Output};

use gyroswarm::cli::compare;
use gyroswarm::scenarios::{build_scenario, circle, ScenarioOptions};

fn gyroswarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gyroswarm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("out/circle9");
    let out = gyroswarm(&[
        "run",
        "--scenario",
        "circle",
        "--n",
        "9",
        "--t-end",
        "40",
        "--seed",
        "7",
        "--plot",
        "--out",
        path_arg(&prefix),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    for suffix in ["_traj.csv", "_diag.csv", "_meta.json", "_xy.svg", "_xz.svg"] {
        let file = dir.path().join(format!("out/circle9{suffix}"));
        assert!(
            file.metadata().unwrap().len() > 0,
            "{} missing",
            file.display()
        );
    }
    let traj = std::fs::read_to_string(dir.path().join("out/circle9_traj.csv")).unwrap();
    let diag = std::fs::read_to_string(dir.path().join("out/circle9_diag.csv")).unwrap();
    // 401 samples at interval 0.1 over [0, 40].
    assert_eq!(diag.lines().count(), 1 + 401);
    assert_eq!(traj.lines().count(), 1 + 401 * 9);
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/circle9_meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["params"]["seed"], 7);
    assert_eq!(meta["agents"], 9);
}

#[test]
fn ablation_without_avoidance_warns_about_penetrations() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("obs");
    let out = gyroswarm(&[
        "run",
        "--scenario",
        "obstacles",
        "--no-avoidance",
        "--out",
        path_arg(&prefix),
    ]);
    assert!(out.status.success());
    assert!(
        text(&out.stderr).contains("obstacle penetration events"),
        "{}",
        text(&out.stderr)
    );
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let out = gyroswarm(&["run", "--scenario", "nosuch"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("unknown scenario"));
}

#[test]
fn invalid_parameters_are_usage_errors() {
    assert_eq!(gyroswarm(&["run", "--dt=-1"]).status.code(), Some(2));
    assert_eq!(gyroswarm(&["run", "--kappa", "1.5"]).status.code(), Some(2));
    assert_eq!(gyroswarm(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn list_scenarios_names_all_builtins() {
    let out = gyroswarm(&["list-scenarios"]);
    assert!(out.status.success());
    let listing = text(&out.stdout);
    for name in ["circle", "overtake", "ball3d", "obstacles"] {
        assert!(listing.contains(name));
    }
}

#[test]
fn exported_scenario_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("ball.json");
    let common = ["--n", "5", "--seed", "3", "--t-end", "3", "--nu", "0.01"];
    let mut export = vec![
        "export-scenario",
        "--scenario",
        "ball3d",
        "--to",
        path_arg(&file),
    ];
    export.extend(common);
    assert!(gyroswarm(&export).status.success());

    let direct = dir.path().join("direct");
    let mut run = vec!["run", "--scenario", "ball3d", "--out", path_arg(&direct)];
    run.extend(common);
    assert!(gyroswarm(&run).status.success());

    let reloaded = dir.path().join("reloaded");
    let out = gyroswarm(&[
        "run",
        "--scenario",
        path_arg(&file),
        "--out",
        path_arg(&reloaded),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));

    for suffix in ["_traj.csv", "_diag.csv"] {
        let a = std::fs::read(dir.path().join(format!("direct{suffix}"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("reloaded{suffix}"))).unwrap();
        assert!(a == b, "{suffix} differs after reload");
    }
}

#[test]
fn compare_prints_both_columns() {
    let out = gyroswarm(&[
        "compare",
        "--scenario",
        "circle",
        "--n",
        "3",
        "--t-end",
        "10",
    ]);
    assert!(out.status.success());
    let table = text(&out.stdout);
    assert!(table.contains("avoidance on") && table.contains("avoidance off"));
    assert!(table.contains("min pairwise distance"));
}

#[test]
fn avoidance_keeps_circle_agents_further_apart() {
    let cmp = compare(&circle(3, 0.5, 0)).unwrap();
    assert!(cmp.on.min_pair_dist > cmp.off.min_pair_dist);
}

#[test]
fn lone_agent_is_unaffected_by_the_switch() {
    let cmp = compare(&circle(1, 0.5, 0)).unwrap();
    assert_eq!(cmp.on, cmp.off);
}

#[test]
fn avoidance_prevents_obstacle_penetration() {
    let options = ScenarioOptions {
        n: Some(8),
        ..Default::default()
    };
    let cmp = compare(&build_scenario("obstacles", &options).unwrap()).unwrap();
    assert_eq!(cmp.on.penetrations, 0);
}
