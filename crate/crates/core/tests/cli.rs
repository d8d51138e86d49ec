use std::path::Path;
use std::process::{Command, Output};

use lifted_filter::scenario::bundled::office3;
use lifted_filter::scenario::CSV_COLUMNS;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lifted-filter"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn filter_writes_metrics_csv() {
    let o = bin(&["filter", "--scenario", "builtin:office-n:3", "--with-oracle"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_COLUMNS.join(",").as_str()));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.starts_with(|c: char| c.is_ascii_digit()) && r.contains(",1,6,")), "{rows:?}");
}

#[test]
fn metrics_files_are_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = bin(&["filter", "--scenario", "builtin:office3", "--format", "json", "--out", path(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!x.is_empty());
    assert_eq!(x, y);
    let rows: serde_json::Value = serde_json::from_slice(&x).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 15);
}

#[test]
fn scenario_files_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("office3.json");
    office3().unwrap().save(&file).unwrap();
    let from_file = bin(&["filter", "--scenario", path(&file)]);
    let builtin = bin(&["filter", "--scenario", "builtin:office3"]);
    assert_eq!(code(&from_file), 0);
    assert_eq!(from_file.stdout, builtin.stdout);
}

#[test]
fn compare_and_oracle_agree() {
    let o = bin(&["compare", "--scenario", "builtin:office-n:2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("step,max_deviation"));
    let o = bin(&["oracle", "--scenario", "builtin:office-n:2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().skip(1).all(|r| r.contains(",,2,")), "{}", stdout(&o));
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    let mut text = office3().unwrap().to_json().unwrap();
    text = text.replacen("\"weight\": 2.0", "\"weight\": -2.0", 1);
    assert!(text.contains("-2.0"));
    std::fs::write(&file, text).unwrap();
    let o = bin(&["filter", "--scenario", path(&file)]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));

    let o = bin(&["filter", "--scenario", "builtin:office3", "--prune", "1.5"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn resource_limit_exits_3() {
    let o = bin(&["filter", "--scenario", "builtin:office3", "--budget", "1"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn impossible_observation_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("obs.json");
    std::fs::write(
        &file,
        r#"[{"count": {"region": {"has": "Room"}, "count": 7}}]"#,
    )
    .unwrap();
    let o = bin(&["filter", "--scenario", "builtin:office-n:2", "--observations", path(&file)]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 1"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sampling_is_reproducible() {
    let args = ["sample", "--scenario", "builtin:office-n:3", "--steps", "5", "--runs", "3", "--seed", "11"];
    let a = bin(&args);
    let b = bin(&args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let lines: Vec<serde_json::Value> = stdout(&a).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    for (i, t) in lines.iter().enumerate() {
        assert_eq!(t["run"], i as u64);
        assert_eq!(t["rng"], "chacha8-v1");
        assert_eq!(t["states"].as_array().unwrap().len(), 6);
    }
}

#[test]
fn stats_sweep_reports_ratios() {
    let o = bin(&["stats", "--sweep-agents", "3", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ratios: Vec<f64> = rows.as_array().unwrap().iter().map(|r| r["ratio"].as_f64().unwrap()).collect();
    assert_eq!(ratios, vec![1.0, 2.0, 6.0]);
}

#[test]
fn unknown_builtin_is_an_error() {
    let o = bin(&["filter", "--scenario", "builtin:nowhere"]);
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown builtin"));
}
