use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use arsub_core::spectral::io::{write_field, StoredField};
use arsub_core::Grid;

fn arsub(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arsub")).args(args).output().expect("spawn arsub")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SMALL_TWO_MODE: &str = r#"{
  "grid": {"d": 2, "n": 16},
  "time": {"T": 1.0, "n_t": 9},
  "model": {"family": "power", "gamma": 2.0, "h": {"kind": "linear", "coef": [0.05, 0.05]}},
  "data": {"scenario": "two-mode-transfer"}
}"#;

#[test]
fn build_verify_export_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL_TWO_MODE);
    let bundle = tmp.path().join("bundle");
    let b = arsub(&["build", "--config", s(&cfg), "--out", s(&bundle)]);
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    assert!(stdout(&b).contains("subsolution membership: PASS"));

    let v = arsub(&["verify", s(&bundle)]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
    assert!(stdout(&v).contains("verification: PASS"));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(bundle.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(true));

    let csv = tmp.path().join("csv");
    let e = arsub(&["export-csv", s(&bundle), "--out", s(&csv)]);
    assert_eq!(e.status.code(), Some(0), "{}", stderr(&e));
    assert!(csv.join("node_0008.csv").exists() && csv.join("lambda.csv").exists());
}

#[test]
fn unequal_mass_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/incompatible-demo.json");
    for extra in [&[][..], &["--force"][..]] {
        let mut args = vec!["build", "--config", s(&cfg), "--out", s(tmp.path())];
        args.extend(extra);
        let o = arsub(&args);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains("mass compatibility"), "{}", stderr(&o));
    }
}

#[test]
fn unbalanced_momentum_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let g = Grid::new(2, 16).unwrap();
    let p = tmp.path();
    let rho0 = g.sample(|x| 2.0 + 0.5 * (PI * x[0]).sin());
    let rho_end = g.sample(|x| 2.0 + 0.5 * (PI * x[1]).cos());
    write_field(&p.join("rho0.fld"), 2, 16, &StoredField::Scalar(rho0)).unwrap();
    write_field(&p.join("rho_end.fld"), 2, 16, &StoredField::Scalar(rho_end)).unwrap();
    write_field(&p.join("u0.fld"), 2, 16, &StoredField::Vector(g.zero_vector())).unwrap();
    write_field(&p.join("u_end.fld"), 2, 16, &StoredField::Vector(g.sample_vector(|_| vec![0.2, 0.0]))).unwrap();
    let cfg = write_config(
        p,
        "run.json",
        r#"{
          "grid": {"d": 2, "n": 16},
          "time": {"T": 1.0, "n_t": 9},
          "model": {"family": "power", "gamma": 2.0},
          "data": {"rho0": "rho0.fld", "u0": "u0.fld", "rho_end": "rho_end.fld", "u_end": "u_end.fld"}
        }"#,
    );
    let out = p.join("bundle");
    let refused = arsub(&["build", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(stderr(&refused).contains("momentum compatibility"), "{}", stderr(&refused));

    let forced = arsub(&["build", "--config", s(&cfg), "--out", s(&out), "--force"]);
    assert_eq!(forced.status.code(), Some(1), "{}", stderr(&forced));
    assert!(stdout(&forced).contains("momentum compatibility: FAIL"));
    let v = arsub(&["verify", s(&out)]);
    assert_eq!(v.status.code(), Some(1));
    assert!(stdout(&v).contains("mean momentum endpoint values: FAIL"), "{}", stdout(&v));
}

#[test]
fn static_data_energy_series() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "static.json",
        r#"{
          "grid": {"d": 2, "n": 16},
          "time": {"T": 1.0, "n_t": 9},
          "model": {"family": "power", "gamma": 2.0, "h": {"kind": "linear", "coef": [0.01, 0.0]}},
          "data": {"scenario": "static-admissible"},
          "schedule": {"mode": "admissible", "lambda0": 2.0}
        }"#,
    );
    let bundle = tmp.path().join("bundle");
    assert_eq!(arsub(&["build", "--config", s(&cfg), "--out", s(&bundle)]).status.code(), Some(0));
    let e = arsub(&["energy", s(&bundle)]);
    assert_eq!(e.status.code(), Some(0), "{}", stdout(&e));
    assert!(stdout(&e).contains("energy inequality: PASS"));
    let text = fs::read_to_string(bundle.join("energy.csv")).unwrap();
    assert_eq!(text.lines().count(), 10);
    let v = arsub(&["verify", s(&bundle)]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
    assert!(stdout(&v).contains("energy level certificate: PASS"));
}

#[test]
fn decompose_writes_both_endpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL_TWO_MODE);
    let out = tmp.path().join("split");
    let o = arsub(&["decompose", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for side in ["initial", "terminal"] {
        for f in ["v.fld", "phi.fld", "V.json"] {
            assert!(out.join(side).join(f).exists());
        }
    }
    let again = arsub(&["decompose", "--input", s(&out.join("initial/v.fld")), "--out", s(&tmp.path().join("v"))]);
    assert_eq!(again.status.code(), Some(0), "{}", stderr(&again));
    assert!(stdout(&again).contains("input: mean momentum"));
}

#[test]
fn check_1d_passes_and_reports_json() {
    let o = arsub(&["check-1d"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("1D momentum equivalence: PASS"));
    let json: serde_json::Value = serde_json::from_str(&text[text.find('{').unwrap()..]).unwrap();
    assert_eq!(json["n"], 256);
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "bad.json", r#"{"grid": {"d": 2, "n": 12}, "time": {"T": 1.0, "n_t": 5}, "data": {"scenario": "two-mode-transfer"}}"#);
    let o = arsub(&["build", "--config", s(&bad), "--out", s(&tmp.path().join("b"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"));

    let unknown = write_config(tmp.path(), "unknown.json", r#"{"grid": {"d": 2, "n": 16, "extra": 1}, "time": {"T": 1.0, "n_t": 5}, "data": {"scenario": "two-mode-transfer"}}"#);
    assert_eq!(arsub(&["build", "--config", s(&unknown), "--out", s(&tmp.path().join("c"))]).status.code(), Some(2));

    let missing = arsub(&["verify", s(&tmp.path().join("nowhere"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn corrupted_energy_level_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL_TWO_MODE);
    let bundle = tmp.path().join("bundle");
    assert_eq!(arsub(&["build", "--config", s(&cfg), "--out", s(&bundle)]).status.code(), Some(0));
    let path = bundle.join("lambda.csv");
    let (header, mut rows) = arsub_core::pipeline::read_csv(&path).unwrap();
    for r in &mut rows {
        r[1] *= 0.5;
    }
    arsub_core::pipeline::write_csv(&path, &header, &rows).unwrap();
    let v = arsub(&["verify", s(&bundle)]);
    assert_eq!(v.status.code(), Some(1));
    assert!(stdout(&v).contains("subsolution membership: FAIL"));
}
