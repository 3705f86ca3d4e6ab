use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const MATCHING: &str = r#"{
  "nodes": [
    {"name": "C", "kind": "chance", "states": ["c0", "c1"]},
    {"name": "D", "kind": "decision", "states": ["d0", "d1"], "info_set": ["C"]},
    {"name": "V", "kind": "value", "info_set": ["C", "D"]}
  ],
  "probabilities": {"C": [0.4, 0.6]},
  "utilities": {"V": [1, 0, 0, 1]}
}"#;

fn limid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limid")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn file(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn validate_reports_summary_and_errors() {
    let dir = TempDir::new().unwrap();
    let nm = dir.path().join("nm.json");
    assert!(limid(&["generate", "--family", "nmonitoring", "--n", "1", "--out", s(&nm)]).status.success());
    let o = limid(&["validate", s(&nm)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("4 path nodes, 1 value node, |S|=16\n"));

    let cyclic = file(
        &dir,
        "cycle.json",
        r#"{"nodes": [
            {"name": "A", "kind": "chance", "states": ["x", "y"], "info_set": ["B"]},
            {"name": "B", "kind": "chance", "states": ["x", "y"], "info_set": ["A"]}],
          "probabilities": {"A": [[0.5, 0.5], [0.5, 0.5]], "B": [[0.5, 0.5], [0.5, 0.5]]}}"#,
    );
    let o = limid(&["validate", s(&cyclic)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CycleDetected"));

    let skewed = file(&dir, "skew.json", &MATCHING.replace("[0.4, 0.6]", "[0.4, 0.5]"));
    let o = limid(&["validate", s(&skewed)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NotNormalized at C,()"), "{}", stderr(&o));

    let broken = file(&dir, "broken.json", "{ not json");
    assert_eq!(limid(&["validate", s(&broken)]).status.code(), Some(4));
    assert_eq!(limid(&["validate", "/nonexistent/file.json"]).status.code(), Some(4));
}

#[test]
fn stats_match_closed_forms() {
    let dir = TempDir::new().unwrap();
    let pf = dir.path().join("pf.json");
    assert!(limid(&["generate", "--family", "pigfarm", "--n", "3", "--out", s(&pf)]).status.success());
    let o = limid(&["stats", s(&pf), "--lower-bound", "on", "--json"]);
    let v = json(&o);
    assert_eq!(v["toolkit_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["formulations"][0]["headline_total"], 6150);
    assert_eq!(v["formulations"][1]["headline_total"], 2066);
    assert_eq!(v["formulations"][1]["family_closed_form"], 2066);
    let table = stdout(&limid(&["stats", s(&pf), "--lower-bound", "on"]));
    assert!(table.contains("improved is smaller than original (2066 vs 6150)"));
}

#[test]
fn emit_is_deterministic_and_honours_probcut() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "m.json", MATCHING);
    let (a, b) = (dir.path().join("a.lp"), dir.path().join("b.lp"));
    for out in [&a, &b] {
        assert!(limid(&["emit", s(&m), "--format", "lp", "--out", s(out)]).status.success());
    }
    let lp = fs::read(&a).unwrap();
    assert_eq!(lp, fs::read(&b).unwrap());
    assert!(String::from_utf8(lp).unwrap().contains(" probcut:"));
    let without = stdout(&limid(&["emit", s(&m), "--no-probcut"]));
    assert!(!without.contains("probcut"));
    let mps1 = stdout(&limid(&["emit", s(&m), "--format", "mps", "--formulation", "original"]));
    let mps2 = stdout(&limid(&["emit", s(&m), "--format", "mps", "--formulation", "original"]));
    assert_eq!(mps1, mps2);
    assert!(mps1.starts_with("NAME          limid_original\n"));
}

#[test]
fn solve_brute_spu_and_import() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "m.json", MATCHING);
    let v = json(&limid(&["solve", s(&m), "--method", "brute"]));
    assert_eq!(v["expected_utility"], 1.0);
    assert_eq!(v["strategy"]["D"]["c1"], "d1");

    let first = stdout(&limid(&["solve", s(&m), "--method", "spu", "--restarts", "10", "--seed", "7"]));
    let second = stdout(&limid(&["solve", s(&m), "--method", "spu", "--restarts", "10", "--seed", "7"]));
    assert_eq!(first, second);

    let sol = file(&dir, "m.sol", "# from a solver\n=obj= 1\nz_D__c0__d0 1\nz_D__c1__d1 0.9\nx_p0 1\n");
    let v = json(&limid(&["solve", s(&m), "--import-solution", s(&sol)]));
    assert_eq!(v["expected_utility"], 1.0);
    assert_eq!(v["file_objective"], 1.0);
    assert_eq!(v["warnings"].as_array().unwrap().len(), 1);

    let not_one_hot = file(&dir, "bad.sol", "z_D__c0__d0 1\nz_D__c0__d1 1\nz_D__c1__d1 1\n");
    let o = limid(&["solve", s(&m), "--import-solution", s(&not_one_hot)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NotOneHot"));
}

#[test]
fn capacity_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let pf = dir.path().join("pf.json");
    assert!(limid(&["generate", "--family", "pigfarm", "--n", "3", "--out", s(&pf)]).status.success());
    let o = limid(&["solve", s(&pf), "--method", "brute", "--strategy-cap", "10"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("StrategySpaceTooLarge"));
    let o = limid(&["stats", s(&pf), "--path-cap", "100"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("PathExplosion"));
}

#[test]
fn bench_csv_is_reproducible() {
    let args = ["bench", "--family", "nmonitoring", "--n", "2", "--instances", "4", "--seed", "3", "--no-timing"];
    let a = stdout(&limid(&args));
    assert_eq!(a, stdout(&limid(&args)));
    let mut rows = csv::Reader::from_reader(a.as_bytes());
    let header = rows.headers().unwrap().clone();
    assert_eq!(header.iter().take(8).collect::<Vec<_>>(), ["instance", "seed", "paths", "brute_eu", "spu_eu", "spu_moves", "spu_wall_ms", "match"]);
    let records: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 4);
    assert!(records.iter().enumerate().all(|(i, r)| r[0] == i.to_string() && &r[2] == "64"));
}

#[test]
fn chd_report_lists_every_level() {
    let o = limid(&["chd", "--risk-levels", "4", "--json"]);
    let v = json(&o);
    let levels = v["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 4);
    assert_eq!(levels[0]["first_test"], "none");
    assert_eq!(v["flags"]["risk_levels"], 4);
}
