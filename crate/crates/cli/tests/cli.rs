//! End-to-end runs of the built binary.

use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_lattice-homog");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("LATTICE_HOMOG_JOBS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).expect("valid JSON output")
}

fn csv_rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o).lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

#[test]
fn describe_octet_reports_classes_and_volume() {
    let o = run(&["describe", "--lattice", "octet", "--param", "L=1.3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["joint_classes"], 1);
    assert_eq!(v["bar_classes"], 6);
    assert_eq!(v["bars"].as_array().unwrap().len(), 6);
    let volume = v["volume"].as_f64().unwrap();
    assert!(close(volume, 1.3f64.powi(3) / 2f64.sqrt(), 1e-12), "{volume}");
}

#[test]
fn describe_honeycomb_volume() {
    let o = run(&["describe", "--lattice", "honeycomb"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["joint_classes"], 2);
    assert_eq!(v["bar_classes"], 3);
    assert!(close(v["volume"].as_f64().unwrap(), 1.5 * 3f64.sqrt(), 1e-12));
}

#[test]
fn describe_csv_lists_summary() {
    let o = run(&["describe", "--lattice", "chain", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&o);
    assert_eq!(rows[0], ["quantity", "value"]);
    assert!(rows.iter().any(|r| r == &["bar_classes", "1"]));
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"dimension\": 2,").unwrap();
    let o = run(&["describe", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn invalid_lattice_exits_2_with_violation_list() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"dimension": 2, "basis": [[1, 0], [2, 0]], "joints": [[0, 0]],
            "bars": [{"begin": {"joint": 0, "offset": [0, 0]}, "end": {"joint": 3, "offset": [1, 0]},
                      "section": {"EA": 1}}]}"#,
    )
    .unwrap();
    let o = run(&["describe", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("SingularBasis"), "{err}");
    assert!(err.contains("UnknownJoint"), "{err}");
}

#[test]
fn json_input_round_trips_catalog_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.json");
    std::fs::write(
        &path,
        r#"{"dimension": 1, "basis": [[2.0]], "joints": [[0.0]],
            "bars": [{"begin": {"joint": 0, "offset": [0]}, "end": {"joint": 0, "offset": [1]},
                      "section": {"EA": 3.0}}]}"#,
    )
    .unwrap();
    let o = run(&["homogenize", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(close(json(&o)["C"][0][0].as_f64().unwrap(), 3.0, 1e-8));
}

#[test]
fn lattice_source_must_be_unique() {
    let o = run(&["describe", "--lattice", "chain", "--input", "x.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["describe"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["describe", "--lattice", "kagome"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["describe", "--lattice", "chain", "--param", "L=-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tolerances_must_be_positive() {
    let o = run(&["homogenize", "--lattice", "chain", "--tol-fit", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["homogenize", "--lattice", "chain", "--tol-extrap", "-1e-8"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn chain_dispersion_single_branch() {
    let (ea, l) = (1.7, 1.3);
    let o = run(&["dispersion", "--lattice", "chain", "--param", "EA=1.7,L=1.3", "--kpath", "0;0.5", "--resolution", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&o);
    assert_eq!(rows[0], ["sample", "c0", "k0", "branch0"]);
    assert_eq!(rows.len() - 1, 9);
    for r in &rows[1..] {
        let k: f64 = r[2].parse().unwrap();
        let w: f64 = r[3].parse().unwrap();
        let expected = 4.0 * ea / (l * l) * (k * l / 2.0).sin().powi(2);
        assert!((w - expected).abs() <= 1e-12 * (1.0 + expected), "{w} vs {expected}");
    }
}

#[test]
fn dispersion_gamma_has_translation_zeros() {
    let o = run(&["dispersion", "--lattice", "honeycomb", "--kpath", "0,0", "--resolution", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&o);
    assert_eq!(rows.len(), 2);
    let branches: Vec<f64> = rows[1][5..].iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(branches.len(), 6);
    assert_eq!(branches.iter().filter(|b| b.abs() < 1e-12).count(), 2);
}

#[test]
fn homogenize_honeycomb_matches_closed_form() {
    let o = run(&["homogenize", "--lattice", "honeycomb", "--param", "EA=1,EI=0.01,L=1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    let (ea, ei, l) = (1.0f64, 0.01f64, 1.0f64);
    let s3 = 3f64.sqrt();
    let den = ea * l.powi(3) + 12.0 * ei * l;
    let c11 = ea * (ea * l * l + 36.0 * ei) / (2.0 * s3 * den);
    let c12 = ea * (ea * l * l - 12.0 * ei) / (2.0 * s3 * den);
    let c33 = 4.0 * s3 * ea * ei / den;
    let c = |i: usize, j: usize| v["C"][i][j].as_f64().unwrap();
    assert!(close(c(0, 0), c11, 1e-6));
    assert!(close(c(1, 1), c11, 1e-6));
    assert!(close(c(0, 1), c12, 1e-6));
    assert!(close(c(2, 2), c33, 1e-6));
    assert!(close(v["H"][0][0].as_f64().unwrap(), 8.0 * s3 * ei, 1e-6));
    assert_eq!(v["symmetry"], "isotropic");
}

#[test]
fn homogenize_octet_is_cubic() {
    let o = run(&["homogenize", "--lattice", "octet"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["symmetry"], "cubic");
}

#[test]
fn mechanism_exits_3_with_singular_limit() {
    let o = run(&["homogenize", "--lattice", "honeycomb", "--param", "EA=1,EI=0,L=1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("singular continuum limit"), "{}", stderr(&o));
}

#[test]
fn converge_chain_slope_near_two() {
    let o = run(&["converge", "--lattice", "chain", "--load", "1@0.5; 2@0.2i"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&o);
    assert_eq!(rows[0], ["eps", "P", "discrete_energy", "continuum_energy", "gap", "running_slope"]);
    assert_eq!(rows.len(), 5);
    assert!(rows[1][5].is_empty());
    let last: f64 = rows[4][5].parse().unwrap();
    assert!((last - 2.0).abs() < 0.1, "{last}");
    assert!(stderr(&o).contains("slope"));
}

#[test]
fn converge_sparse_solver_agrees() {
    let f = run(&["converge", "--lattice", "honeycomb", "--epsilons", "0.25,0.125"]);
    let s = run(&["converge", "--lattice", "honeycomb", "--epsilons", "0.25,0.125", "--solver", "sparse"]);
    assert_eq!(f.status.code(), Some(0), "{}", stderr(&f));
    assert_eq!(s.status.code(), Some(0), "{}", stderr(&s));
    for (a, b) in csv_rows(&f)[1..].iter().zip(&csv_rows(&s)[1..]) {
        let (x, y): (f64, f64) = (a[2].parse().unwrap(), b[2].parse().unwrap());
        assert!(close(x, y, 1e-9), "{x} vs {y}");
    }
}

#[test]
fn converge_single_scale_has_no_slope_column() {
    let o = run(&["converge", "--lattice", "chain", "--epsilons", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&o);
    assert_eq!(rows[0], ["eps", "P", "discrete_energy", "continuum_energy", "gap"]);
    assert_eq!(rows.len(), 2);
}

#[test]
fn converge_unbalanced_load_exits_3() {
    let o = run(&["converge", "--lattice", "chain", "--load", "0@1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("unbalanced"));
}

#[test]
fn converge_rejects_bad_inputs() {
    assert_eq!(run(&["converge", "--lattice", "chain", "--epsilons", "0.3"]).status.code(), Some(2));
    assert_eq!(run(&["converge", "--lattice", "chain", "--solver", "cg"]).status.code(), Some(2));
}

#[test]
fn validate_default_run_passes() {
    let o = run(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&o);
    assert_eq!(rows[0], ["check", "status", "rel_error", "tolerance"]);
    assert_eq!(rows.len() - 1, 22);
    for r in &rows[1..] {
        assert_ne!(r[1], "FAIL", "{r:?}");
        let err: f64 = r[2].parse().unwrap();
        assert!(err.is_finite());
    }
    let known: Vec<&str> = rows[1..].iter().filter(|r| r[1] == "known-discrepancy").map(|r| r[0].as_str()).collect();
    assert_eq!(known, ["octet.C11", "octet.C12", "octet.C44"]);
}

#[test]
fn validate_injected_mismatch_names_the_check() {
    for name in ["honeycomb.C33", "octet.C11", "honeycomb.mechanism", "chain.dynamical-matrix"] {
        let o = run(&["validate", "--inject-mismatch", name, "--format", "json"]);
        assert_eq!(o.status.code(), Some(3), "{name}");
        assert!(stderr(&o).contains(name));
        let v = json(&o);
        let failed: Vec<&str> = v
            .as_array()
            .unwrap()
            .iter()
            .filter(|r| r["status"] == "FAIL")
            .map(|r| r["check"].as_str().unwrap())
            .collect();
        assert_eq!(failed, [name]);
    }
    assert_eq!(run(&["validate", "--inject-mismatch", "nope"]).status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let args = ["dispersion", "--lattice", "octet", "--resolution", "40"];
    let a = run(&args);
    let b = Command::new(BIN).args(args).env("LATTICE_HOMOG_JOBS", "1").output().unwrap();
    let c = run(&[&args[..], &["--jobs", "3"]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let h1 = run(&["homogenize", "--lattice", "honeycomb", "--format", "csv"]);
    let h2 = run(&["homogenize", "--lattice", "honeycomb", "--format", "csv"]);
    assert_eq!(h1.stdout, h2.stdout);
}

#[test]
fn jobs_env_must_be_a_count() {
    let o = Command::new(BIN).args(["describe", "--lattice", "chain"]).env("LATTICE_HOMOG_JOBS", "many").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("moduli.json");
    let o = run(&["homogenize", "--lattice", "chain", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["dimension"], 1);
}
