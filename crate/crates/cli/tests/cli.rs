use std::fs;
use std::path::Path;
use std::process::Command;

use rosenau_fp_cli::{parse_config, run_experiment, Command as Sub, InitialSpec, UsageError};
use rosenau_fp::lattice::InitialData;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rosenau-fp"))
}

/// Data rows of a CSV report: skips `#` metadata and the header.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn run_to(args: &[&str], out: &Path) -> std::process::Output {
    let o = bin()
        .args(args)
        .arg("--output")
        .arg(out)
        .output()
        .expect("binary runs");
    assert!(out.exists(), "report written for {args:?}");
    o
}

#[test]
fn parses_documented_example() {
    let cfg = parse_config(
        ["evolve", "--N", "8", "--t", "0.5,1,2", "--initial", "three-point:k=8,theta0=1"],
        None,
    )
    .unwrap();
    assert_eq!(cfg.command, Sub::Evolve);
    assert_eq!(cfg.resolutions, vec![8]);
    assert_eq!(cfg.times, vec![0.5, 1.0, 2.0]);
    assert_eq!(
        cfg.initial,
        InitialSpec::Recipe(InitialData::ThreePoint { k: 8, theta0: 1.0 })
    );
}

#[test]
fn zero_resolution_is_a_usage_error() {
    match parse_config(["evolve", "--N", "0"], None) {
        Err(UsageError::Invalid { key, .. }) => assert_eq!(key, "N"),
        other => panic!("expected usage error, got {other:?}"),
    }
    let o = bin().args(["evolve", "--N", "0"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`N`"));
}

#[test]
fn out_of_range_values_name_their_key() {
    let key_of = |args: &[&str]| match parse_config(args.iter().copied(), None) {
        Err(UsageError::Invalid { key, .. }) => key,
        other => panic!("expected usage error for {args:?}, got {other:?}"),
    };
    assert_eq!(key_of(&["evolve", "--t", "-1"]), "t");
    assert_eq!(key_of(&["evolve", "--lambda-max", "0"]), "lambda-max");
    assert_eq!(key_of(&["evolve", "--tail-tol", "2"]), "tail-tol");
    assert_eq!(key_of(&["stencil", "--order", "3"]), "order");
    assert_eq!(key_of(&["metric", "--s", "0"]), "s");
    assert_eq!(key_of(&["evolve", "--N", "2", "--initial", "three-point:k=99,theta0=1"]), "initial");
    assert!(matches!(
        parse_config(["evolve", "--nonsense"], None),
        Err(UsageError::Args(_))
    ));
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "N = 4\nt = [0.25]\nseed = 11\n").unwrap();
    let cfg = parse_config(["evolve", "--N", "8"], Some(&path)).unwrap();
    assert_eq!(cfg.resolutions, vec![8]);
    assert_eq!(cfg.times, vec![0.25]);
    assert_eq!(cfg.seed, 11);
    let via_flag = parse_config(
        ["evolve", "--config", path.to_str().unwrap()],
        None,
    )
    .unwrap();
    assert_eq!(via_flag.resolutions, vec![4]);
}

#[test]
fn unknown_file_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "N = 4\nresolution = 3\n").unwrap();
    let err = parse_config(["evolve"], Some(&path)).unwrap_err();
    assert!(err.to_string().contains("resolution"), "{err}");
}

#[test]
fn stationary_n1_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let density = dir.path().join("s.json");
    let o = run_to(
        &["stationary", "--N", "1", "--density-out", density.to_str().unwrap()],
        &out,
    );
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("\nj,v,coeff,gaussian_density\n"));
    let coeffs: Vec<f64> = csv_rows(&text).iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(coeffs, [1.0, 4.0, 6.0, 4.0, 1.0].map(|c| c / 16.0));
    let back = rosenau_fp::LatticeDensity::from_json(&fs::read_to_string(density).unwrap()).unwrap();
    assert_eq!(back.coeffs(), coeffs.as_slice());
}

#[test]
fn stencil_order_four_rows() {
    let o = bin().args(["stencil", "--order", "4"]).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let rows = csv_rows(&text);
    let expect = [(-2, 1), (-1, -4), (0, 6), (1, -4), (2, 1)];
    assert_eq!(rows.len(), expect.len());
    for (row, (k, c)) in rows.iter().zip(expect) {
        assert_eq!(row, &vec![k.to_string(), c.to_string()]);
    }
}

#[test]
fn stencil_check_appends_moments() {
    let o = bin()
        .args(["stencil", "--order", "6", "--check", "--format", "json"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["columns"], serde_json::json!(["k", "coeff"]));
    assert_eq!(v[0]["data"]["coeff"], serde_json::json!([1, -6, 15, -20, 15, -6, 1]));
    assert_eq!(v[1]["columns"], serde_json::json!(["m", "sum"]));
    assert_eq!(v[1]["data"]["sum"][6], serde_json::json!(720));
}

#[test]
fn evolve_delta_temperature() {
    let cfg = parse_config(["evolve", "--N", "4", "--t", "1", "--initial", "delta:j=0"], None).unwrap();
    let outcome = run_experiment(&cfg).unwrap();
    assert_eq!(outcome.passed, Some(true));
    let temp = outcome.table.column_f64("temperature").unwrap();
    assert!((temp[0] - (1.0 - (-2f64).exp())).abs() < 1e-8);
    assert_eq!(outcome.table.metadata()["config.N"], "4");
    assert_eq!(outcome.table.metadata()["config.initial"], "delta:j=0");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["evolve", "--N", "4", "--t", "0.5,2", "--initial", "random", "--seed", "9"],
        vec!["decay", "--N", "4", "--initial", "three-point:k=4,theta0=0.5"],
        vec!["metric", "--N", "3", "--t", "0,1", "--initial", "random:width=5", "--seed", "2", "--format", "json"],
    ] {
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        run_to(&args, &a);
        let o = bin()
            .args(&args)
            .arg("--output")
            .arg(&b)
            .env("ROSENAU_FP_THREADS", "1")
            .output()
            .unwrap();
        assert!(o.status.success());
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{args:?}");
    }
}

#[test]
fn failed_assertion_still_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stab.csv");
    // d₃ falls by a factor 4 per doubling, outside the expected band.
    let o = run_to(&["stability", "--N-list", "4,8", "--t", "1"], &out);
    assert_eq!(o.status.code(), Some(1));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("\nN,t,d3,ratio_prev_N,eps_bound_constant,pass\n"));
    assert_eq!(csv_rows(&text).len(), 2);
}

#[test]
fn missing_density_file_reports_path() {
    let o = bin()
        .args(["evolve", "--N", "2", "--initial", "file:/nonexistent/density.json"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/density.json"));
}
