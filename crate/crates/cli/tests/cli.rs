use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn weylwalk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weylwalk"))
        .args(args)
        .current_dir(dir)
        .env_remove("WEYLWALK_OUT")
        .env_remove("WEYLWALK_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_single_scenario_writes_records() {
    let tmp = TempDir::new().unwrap();
    let o = weylwalk(tmp.path(), &["run", "--scenario", "continuity_criterion", "--seed", "7", "--out", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("PASS continuity_criterion"));
    assert!(tmp.path().join("out/continuity_criterion_7.csv").is_file());
    assert!(tmp.path().join("out/continuity_criterion_7.json").is_file());
}

#[test]
fn unknown_scenario_lists_valid_names() {
    let tmp = TempDir::new().unwrap();
    let o = weylwalk(tmp.path(), &["run", "--scenario", "warp_drive"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("warp_drive") && err.contains("pmix_chernoff"), "{err}");
}

#[test]
fn walk_override_lowers_sample_count() {
    let tmp = TempDir::new().unwrap();
    let o = weylwalk(
        tmp.path(),
        &["run", "--scenario", "oscillator_chernoff", "--override", "walks.M=1000", "--out", "out"],
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let json = std::fs::read_to_string(tmp.path().join("out/oscillator_chernoff_7.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["params"]["samples"], 1000);
}

#[test]
fn environment_sets_seed_and_output() {
    let tmp = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_weylwalk"))
        .args(["run", "--scenario", "fourier_decay"])
        .current_dir(tmp.path())
        .env("WEYLWALK_OUT", "env_out")
        .env("WEYLWALK_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("env_out/fourier_decay_99.json").is_file());

    // flags win over the environment
    let o = Command::new(env!("CARGO_BIN_EXE_weylwalk"))
        .args(["run", "--scenario", "fourier_decay", "--seed", "3", "--out", "flag_out"])
        .current_dir(tmp.path())
        .env("WEYLWALK_OUT", "env_out")
        .env("WEYLWALK_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("flag_out/fourier_decay_3.json").is_file());
}

#[test]
fn scientific_failure_exits_two() {
    let tmp = TempDir::new().unwrap();
    let o = weylwalk(
        tmp.path(),
        &["run", "--scenario", "fourier_decay", "--override", "fourier_decay.r2_min=1.5", "--out", "out"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("FAIL fourier_decay"));
}

#[test]
fn validate_reports_non_nuclear_square_root() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(
        tmp.path().join("flat.toml"),
        "[[scenarios]]\nname = \"diffusion_chernoff\"\nparams = { d = { kind = \"power\", c = 0.1, p = 2.0 } }\n",
    )
    .unwrap();
    let o = weylwalk(tmp.path(), &["validate", "--config", "flat.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("D^{1/2} not nuclear"), "{}", stdout(&o));

    let o = weylwalk(tmp.path(), &["run", "--config", "flat.toml", "--out", "out"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("REFUSED diffusion_chernoff"));
}

#[test]
fn validate_accepts_geometric_config() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(
        tmp.path().join("geo.toml"),
        r#"
[sequences.g]
kind = "geometric"
c = 0.5
q = 0.25

[sequences.slow]
kind = "geometric"
c = 1.0
q = 0.5

[operators.b]
eigs = "slow"
label = "B"

[[scenarios]]
name = "diffusion_chernoff"
params = { d = "g" }

[[scenarios]]
name = "oscillator_chernoff"
params = { dx = "g", dp = "g", b = "b" }
"#,
    )
    .unwrap();
    let o = weylwalk(tmp.path(), &["validate", "--config", "geo.toml"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(!stdout(&o).contains("FAILS"));
}

#[test]
fn malformed_toml_reports_position() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "seed = 7\n[blocks.a\n").unwrap();
    let o = weylwalk(tmp.path(), &["validate", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "seed = 7\nthreads = 4\n").unwrap();
    let o = weylwalk(tmp.path(), &["validate", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("threads"), "{}", stderr(&o));
}

#[test]
fn report_round_trips_verdicts() {
    let tmp = TempDir::new().unwrap();
    for s in ["continuity_criterion", "shift_truncation", "taylor_check"] {
        let o = weylwalk(tmp.path(), &["run", "--scenario", s, "--out", "out"]);
        assert_eq!(o.status.code(), Some(0));
    }
    let o = weylwalk(tmp.path(), &["run", "--scenario", "fourier_decay", "--override", "fourier_decay.r2_min=1.5", "--out", "out"]);
    assert_eq!(o.status.code(), Some(2));

    let o = weylwalk(tmp.path(), &["report", "--out", "out"]);
    assert_eq!(o.status.code(), Some(0));
    let table = stdout(&o);
    let rows: Vec<&str> = table.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| scenario")).collect();
    assert_eq!(rows.len(), 4, "{table}");
    for s in ["continuity_criterion", "shift_truncation", "taylor_check"] {
        assert!(rows.iter().any(|r| r.starts_with(&format!("| {s} |")) && r.ends_with("| pass |")), "{table}");
    }
    assert!(rows.iter().any(|r| r.starts_with("| fourier_decay |") && r.contains("fail (")), "{table}");
    assert!(table.contains("1 of 4 runs did not pass"));
}

#[test]
fn report_on_empty_or_missing_dir_fails() {
    let tmp = TempDir::new().unwrap();
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    let o = weylwalk(tmp.path(), &["report", "--out", "empty"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("no runs found"));
    let o = weylwalk(tmp.path(), &["report", "--out", "missing"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bundled_config_passes_every_scenario() {
    let tmp = TempDir::new().unwrap();
    let o = weylwalk(tmp.path(), &["run", "--scenario", "all", "--out", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS ")).count(), 10);
}

#[test]
fn list_prints_every_scenario() {
    let tmp = TempDir::new().unwrap();
    let o = weylwalk(tmp.path(), &["list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 10);
}
