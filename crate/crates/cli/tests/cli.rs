use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_halfline"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn multiplicity_csv_matches_counting_function() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "m.json",
        r#"{"potential": {"diagonal": [1, 4]}, "realization": {"kind": "dirichlet"},
            "t_grid": {"start": 0, "end": 10, "n": 200}}"#,
    );
    let out = run(&["multiplicity", "--format", "csv"], Some(&cfg));
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(rdr.headers().unwrap(), vec!["t", "rank", "exceptional", "realization", "rank_tol"]);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        rows += 1;
        let t: f64 = rec[0].parse().unwrap();
        let rank: usize = rec[1].parse().unwrap();
        assert_eq!(&rec[3], "dirichlet");
        if &rec[2] == "false" {
            let count = [1.0, 4.0].iter().filter(|&&l| l < t).count();
            assert_eq!(rank, count, "t = {t}");
        }
    }
    assert_eq!(rows, 200);
}

#[test]
fn grid_n_and_rank_tol_flags_override_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "m.json", r#"{"potential": {"diagonal": [1, 4]}, "t_grid": {"start": 0, "end": 10, "n": 200}}"#);
    let out = run(&["multiplicity", "--grid-n", "17", "--rank-tol", "1e-6"], Some(&cfg));
    let v = json_of(&out);
    assert_eq!(v["table"]["t_grid"].as_array().unwrap().len(), 17);
    assert_eq!(v["table"]["rank_tol"].as_f64(), Some(1e-6));
}

#[test]
fn triplet_sum_reports_identity() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "s.json", r#"{"blocks": [{"diagonal": [0.2]}, {"diagonal": [1.5]}]}"#);
    let out = run(&["triplet-sum"], Some(&cfg));
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!(v["direct_sum_deviation"].as_f64().unwrap() <= 1e-10);
    assert_eq!(v["pass"], Value::Bool(true));
}

#[test]
fn spectrum_interval_columns_agree() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "i.json", r#"{"potential": {"diagonal": [0.5, 2]}, "interval_bc": "DD", "eigen_count": 8}"#);
    let out = run(&["spectrum-interval"], Some(&cfg));
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let rows = v["eigenvalues"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    let first: Vec<f64> = rows.iter().take(4).map(|r| r["formula"].as_f64().unwrap()).collect();
    assert_eq!(first, vec![1.5, 3.0, 4.5, 6.0]);
    for r in rows {
        assert!(r["abs_error"].as_f64().unwrap() < 1e-2);
        assert_eq!(r["pass"], Value::Bool(true));
    }
}

#[test]
fn weyl_eval_scalar_example() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "w.json", r#"{"potential": {"diagonal": [0]}, "realization": {"matrix": [[1]]}, "z": [[0, 1]]}"#);
    let out = run(&["weyl-eval"], Some(&cfg));
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let entry = &v["samples"][0]["value"][0][0];
    assert!((entry[0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((entry[1].as_f64().unwrap() - 0.20710678118654752).abs() < 1e-12);
}

#[test]
fn schrodinger_demo_realizations_agree() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "d.json",
        r#"{"potential": {"schrodinger1d": {"q": [0.5, 0.4, 0.3, 0.2, 0.1, 0.0], "length": 2.0}},
            "t_grid": {"start": 0, "end": 40, "n": 80}}"#,
    );
    let out = run(&["schrodinger-demo", "--format", "csv"], Some(&cfg));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 80);
    for name in ["dirichlet", "neumann", "krein"] {
        assert!(text.contains(name));
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "r.json",
        r#"{"potential": {"matrix": [[2, [0.5, 0.5]], [[0.5, -0.5], 1]]}, "realization": {"kind": "krein"},
            "z": [[0.3, 1], [-2, 0]]}"#,
    );
    for args in [["weyl-eval", "--format", "json"], ["multiplicity", "--format", "csv"]] {
        let a = run(&args, Some(&cfg));
        let b = run(&args, Some(&cfg));
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn out_flag_and_config_path_write_files() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("table.csv");
    let body = format!(
        r#"{{"potential": {{"diagonal": [1]}}, "output": {{"format": "csv", "path": {:?}}}}}"#,
        target.to_str().unwrap()
    );
    let cfg = write_config(&dir, "o.json", &body);
    let out = run(&["multiplicity"], Some(&cfg));
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(&target).unwrap().starts_with("t,rank,exceptional,realization,rank_tol"));
    let other = dir.path().join("table.json");
    let out = run(&["multiplicity", "--format", "json", "--out", other.to_str().unwrap()], Some(&cfg));
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&other).unwrap()).unwrap();
    assert_eq!(v["command"], "multiplicity");
}

#[test]
fn exit_code_two_for_config_errors() {
    let dir = TempDir::new().unwrap();
    let broken = write_config(&dir, "b.json", r#"{"potential": "#);
    assert_eq!(run(&["multiplicity"], Some(&broken)).status.code(), Some(2));
    let negative = write_config(&dir, "n.json", r#"{"potential": {"diagonal": [-1]}}"#);
    assert_eq!(run(&["multiplicity"], Some(&negative)).status.code(), Some(2));
    let unknown = write_config(&dir, "u.json", r#"{"potential": {"diagonal": [1]}, "colour": 3}"#);
    assert_eq!(run(&["multiplicity"], Some(&unknown)).status.code(), Some(2));
    let bad_tol = write_config(&dir, "t.json", r#"{"potential": {"diagonal": [1]}, "rank_tol": 0}"#);
    assert_eq!(run(&["multiplicity"], Some(&bad_tol)).status.code(), Some(2));
    assert_eq!(run(&["multiplicity"], None).status.code(), Some(2));
    let out = run(&["triplet-sum"], Some(&negative));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config_parse");
}

#[test]
fn exit_code_three_for_failed_checks() {
    let dir = TempDir::new().unwrap();
    // the Dirichlet cap at L = 30 cannot resolve z = 3 + 0.5i to 1e-3
    let cfg = write_config(&dir, "r.json", r#"{"potential": {"diagonal": [1]}, "z": [[-1, 0], [3, 0.5]]}"#);
    let out = run(&["resolvent-check"], Some(&cfg));
    assert_eq!(out.status.code(), Some(3));
    let v = json_of(&out);
    assert_eq!(v["cases"][0]["pass"], Value::Bool(true));
    assert_eq!(v["cases"][1]["pass"], Value::Bool(false));
}

#[test]
fn exit_code_four_for_solver_failures() {
    let dir = TempDir::new().unwrap();
    // M(-1) = -1 for T = 0, so B = -1 makes B - M(-1) singular
    let cfg = write_config(&dir, "s.json", r#"{"potential": {"diagonal": [0]}, "realization": {"matrix": [[-1]]}, "z": [-1]}"#);
    let out = run(&["weyl-eval"], Some(&cfg));
    assert_eq!(out.status.code(), Some(4));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "singular_pencil");
}

#[test]
fn verify_all_reports_every_criterion() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("report.json");
    let out = run(&["verify-all", "--seed", "7", "--out", target.to_str().unwrap()], None);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    let criteria = v["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 11);
    assert_eq!(v["seed"], 7);
    let failed = criteria.iter().filter(|c| c["pass"] == Value::Bool(false)).count();
    assert_eq!(out.status.code(), Some(if failed == 0 { 0 } else { 3 }));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 11);
}
