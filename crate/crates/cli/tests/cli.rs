use std::process::{Command, Output};

use serde_json::Value;

fn polyharm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyharm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json report on stdout")
}

#[test]
fn oracle_prints_the_kernel_dimension() {
    let o = polyharm(&["oracle", "--D", "2", "--d", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "5\n");
}

#[test]
fn growth_of_the_line() {
    let o = polyharm(&["growth", "--group", "z1", "--nmax", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<(u32, u64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().parse().unwrap(), f.next().unwrap().parse().unwrap())
        })
        .collect();
    assert_eq!(rows, vec![(0, 1), (1, 3), (2, 5), (3, 7)]);
    assert!(text.starts_with("n,beta,doubling,pansu_ratio\n"));
}

#[test]
fn usage_errors_exit_2() {
    let o = polyharm(&["dim", "--group", "z2", "--d", "9999", "--schedule", "8,12"]);
    assert_eq!(o.status.code(), Some(2));
    let o = polyharm(&["growth", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(polyharm(&["nonsense"]).status.code(), Some(2));
    assert_eq!(polyharm(&["growth", "--group", "q9"]).status.code(), Some(2));
    assert_eq!(polyharm(&["rvc", "--theta", "-0.5"]).status.code(), Some(2));
    assert_eq!(polyharm(&["dim", "--schedule", "8"]).status.code(), Some(2));
    assert_eq!(polyharm(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "group = \"z3\"\nnmax = 4\n[rough]\nregion = 2\n").unwrap();
    let o = polyharm(&["growth", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    let r = json(&o);
    assert_eq!(r["payload"]["spec"], "z3");
    assert_eq!(r["payload"]["beta"], serde_json::json!([1, 7, 25, 63, 129]));
    let o = polyharm(&["growth", "--config", cfg.to_str().unwrap(), "--nmax", "2", "--format", "json"]);
    assert_eq!(json(&o)["payload"]["beta"], serde_json::json!([1, 7, 25]));
    std::fs::write(&cfg, "bogus_key = 1\n").unwrap();
    assert_eq!(polyharm(&["growth", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn reports_are_written_as_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = polyharm(&["dirichlet", "--radius", "4", "--boundary", "x^2 - y^2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("dirichlet.json")).unwrap()).unwrap();
    assert_eq!(report["tool"], "polyharm");
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["payload"]["max_principle"], true);
    let csv = std::fs::read_to_string(out.join("dirichlet.csv")).unwrap();
    assert!(csv.starts_with("index,x1,x2,value\n"));
    assert_eq!(csv.lines().count(), 1 + 61);
}

#[test]
fn harnack_of_a_shifted_coordinate() {
    let o = polyharm(&["harnack", "--radius", "1", "--boundary", "x1 + 10", "--format", "json"]);
    let r = json(&o);
    assert_eq!(r["payload"]["source"], "formula");
    assert_eq!(r["payload"]["ratio"].as_f64().unwrap(), 11.0 / 9.0);
}

#[test]
fn default_pipeline_has_five_stages() {
    let o = polyharm(&["all", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    let stages = r["payload"]["stages"].as_object().unwrap();
    assert_eq!(stages.len(), 5);
    assert!(r["payload"]["errors"].as_object().unwrap().is_empty());
    assert_eq!(stages["dim"]["payload"]["oracle"], 5);
}

#[test]
fn heisenberg_pipeline_has_no_oracle() {
    let o = polyharm(&["all", "--group", "heisenberg", "--format", "json"]);
    let r = json(&o);
    assert_eq!(r["payload"]["stages"]["dim"]["payload"]["label"], "no oracle");
    assert!(r["payload"]["stages"].get("rough").is_none());
}

#[test]
fn unwritable_cache_dir_is_a_stage_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    std::fs::write(&file, "").unwrap();
    let cache = file.join("cache");
    let o = polyharm(&["all", "--cache-dir", cache.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let r = json(&o);
    assert!(r["payload"]["errors"]["growth"].is_string());
    assert!(r["payload"]["stages"]["dim"].is_object());
}

#[test]
fn cache_round_trip_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let a = json(&polyharm(&["growth", "--nmax", "10", "--cache-dir", cache, "--format", "json"]));
    let b = json(&polyharm(&["growth", "--nmax", "10", "--cache-dir", cache, "--format", "json"]));
    assert_eq!(a["payload"], b["payload"]);
    assert_eq!(a["payload"]["beta"][10], 221);
}

#[test]
fn repeated_runs_are_deterministic() {
    let a = json(&polyharm(&["all", "--format", "json"]));
    let b = json(&polyharm(&["all", "--format", "json", "--jobs", "2"]));
    assert_eq!(a["determinism_hash"], b["determinism_hash"]);
    assert_eq!(a["payload"], b["payload"]);
}

#[test]
fn rough_commands() {
    let o = polyharm(&["rough-check", "--window", "6", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["payload"]["injectivization"]["q"], 64);

    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.csv");
    let map = dir.path().join("m.csv");
    std::fs::write(&graph, "0,1\n1,2\n2,3\n").unwrap();
    std::fs::write(&map, "0,0\n1,0\n2,0\n3,0\n").unwrap();
    let o = polyharm(&[
        "rough-check",
        "--group",
        "z1",
        "--graph-csv",
        graph.to_str().unwrap(),
        "--map-csv",
        map.to_str().unwrap(),
        "--a",
        "1",
        "--b",
        "0",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let r = json(&o);
    assert!(r["payload"]["check"]["lower_violations"].as_u64().unwrap() > 0);
    assert!(!r["payload"]["check"]["examples"].as_array().unwrap().is_empty());

    let o = polyharm(&["rough-extend", "--region", "2", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["payload"]["w_radius"], 33);
    assert_eq!(r["payload"]["w_rule"], "b + floor(q/2)");
}
