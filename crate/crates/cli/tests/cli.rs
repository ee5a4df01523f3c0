use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    run_with(args, &[])
}

fn run_with(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_matryoshka"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

/// CSV rows as maps from header to field.
fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| {
            header
                .iter()
                .map(str::to_owned)
                .zip(r.unwrap().iter().map(str::to_owned))
                .collect()
        })
        .collect()
}

fn num(row: &std::collections::HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

#[test]
fn lattice_counts() {
    let v = json(&["lattice", "--k", "2", "--layers", "2", "--alpha", "0.04", "--embed"]);
    assert_eq!(v["sites"].as_array().unwrap().len(), 6);
    assert_eq!(v["bonds"].as_array().unwrap().len(), 9);
    assert_eq!(v["embedding"].as_object().unwrap().len(), 6);

    let v = json(&["lattice", "--k", "3", "--layers", "3", "--alpha", "0.01"]);
    assert_eq!(v["sites"].as_array().unwrap().len(), 12);
    assert_eq!(v["bonds"].as_array().unwrap().len(), 30);
    assert!(v.get("embedding").is_none());
}

#[test]
fn lattice_csv_lists_bonds() {
    let text = ok(&["lattice", "--k", "2", "--layers", "2", "--alpha", "0.04", "--format", "csv"]);
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 9);
    let inter: Vec<_> = rows.iter().filter(|r| r["layer_i"] != r["layer_j"]).collect();
    assert_eq!(inter.len(), 6);
    let j1 = 6f64.sqrt() * 0.04f64.sqrt();
    assert!(inter.iter().all(|r| (num(r, "coupling") - j1).abs() < 1e-15));
}

#[test]
fn parameter_errors_exit_2() {
    for args in [
        &["lattice", "--k", "0", "--layers", "2", "--alpha", "0.1"][..],
        &["lattice", "--k", "2", "--layers", "2", "--alpha", "1.5"],
        &["lattice", "--k", "2", "--layers", "0", "--alpha", "0.1"],
        &["lattice", "--k", "2"],
        &["spectrum", "--k", "2", "--simplex", "--layers", "2"],
        &["spectrum", "--k", "2", "--alpha", "0.1"],
        &["spectrum", "--k", "2", "--layers", "2", "--alpha", "0.1", "--sector", "3,3"],
        &["sdrg", "--k", "2", "--layers", "1", "--alpha", "0.01"],
        &["sdrg", "--k", "4", "--layers", "2", "--alpha", "0.01"],
        &["entropy", "--k", "2", "--layers", "2", "--alpha", "0.01", "--cut", "radial:1"],
        &["entropy", "--k", "2", "--layers", "2", "--alpha", "0.01", "--cut", "bogus"],
        &["entropy", "--k", "2", "--layers", "2", "--cut", "even-odd"],
        &["spectrum", "--k", "2", "--simplex", "--tol", "-1"],
        &["frobnicate"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?} gave no message");
        assert!(out.stdout.is_empty(), "{args:?} wrote output");
    }
}

#[test]
fn bad_worker_count_exits_2() {
    let out = run_with(
        &["lattice", "--k", "2", "--layers", "2", "--alpha", "0.1"],
        &[("MATRYOSHKA_WORKERS", "none")],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_3() {
    let out = run(&[
        "spectrum", "--k", "2", "--layers", "2", "--alpha", "0.01", "--lowest", "1", "--solver", "iterative",
        "--tol", "1e-300",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simplex_tables() {
    let rows = csv_rows(&ok(&["spectrum", "--k", "2", "--simplex"]));
    let got: Vec<(String, f64, u64)> = rows
        .iter()
        .map(|r| (r["diagram"].clone(), num(r, "eigenvalue"), r["degeneracy"].parse().unwrap()))
        .collect();
    assert_eq!(
        got,
        vec![
            ("(1,1,1)".to_owned(), -3.0, 1),
            ("(2,1)".to_owned(), 0.0, 16),
            ("(3)".to_owned(), 3.0, 10)
        ]
    );

    let rows = csv_rows(&ok(&["spectrum", "--k", "3", "--simplex"]));
    assert_eq!(rows.len(), 5);
    let total: u64 = rows.iter().map(|r| r["degeneracy"].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 256);
}

#[test]
fn simplex_offdiagonal_json() {
    let v = json(&["spectrum", "--k", "2", "--simplex", "--variant", "off-diagonal", "--format", "json"]);
    assert_eq!(v["total_degeneracy"], 27);
    assert_eq!(v["variant"], "off-diagonal");
    let repeated = v["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["diagram"] == serde_json::json!([2, 1]) && e["content"] == serde_json::json!([2, 1]))
        .unwrap();
    assert_eq!(repeated["eigenvalue"], -1.0);
    assert!(v["verification"]["max_deviation"].as_f64().unwrap() < 1e-10);
}

#[test]
fn lattice_spectrum_lowest() {
    let rows = csv_rows(&ok(&["spectrum", "--k", "2", "--layers", "2", "--alpha", "0.01", "--lowest", "4"]));
    assert_eq!(rows.len(), 4);
    let values: Vec<f64> = rows.iter().map(|r| num(r, "eigenvalue")).collect();
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
    // Sector ground energy; the next level is threefold.
    assert!((values[0] - (-3.1370065285927824)).abs() < 1e-9, "{values:?}");
    assert!((values[1] - values[3]).abs() < 1e-9);
    assert!(values[0] < -3.0 - 6.0 * 0.01);
}

#[test]
fn lattice_spectrum_dense_matches_iterative() {
    let dense = csv_rows(&ok(&[
        "spectrum", "--k", "2", "--layers", "2", "--alpha", "0.01", "--lowest", "2", "--solver", "dense",
    ]));
    let lanczos = csv_rows(&ok(&[
        "spectrum", "--k", "2", "--layers", "2", "--alpha", "0.01", "--lowest", "2", "--solver", "iterative",
    ]));
    for (d, l) in dense.iter().zip(&lanczos) {
        assert!((num(d, "eigenvalue") - num(l, "eigenvalue")).abs() < 1e-9);
    }
}

#[test]
fn sdrg_k2() {
    let v = json(&["sdrg", "--k", "2", "--layers", "2", "--alpha", "0.01"]);
    let steps = v.as_array().unwrap();
    assert_eq!(steps.len(), 1);
    let s = &steps[0];
    for key in ["layer", "J", "J_tilde", "shift", "deviation", "gap", "warnings"] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert!((s["J_tilde"].as_f64().unwrap() - 0.01).abs() < 1e-12 * 0.01 * 10.0);
    assert!((s["shift"].as_f64().unwrap() + 0.06).abs() < 1e-12);
    assert!(s["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn sdrg_k3_shift() {
    let out = run(&["sdrg", "--k", "3", "--layers", "2", "--alpha", "0.01"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let s = &v[0];
    assert!((s["shift"].as_f64().unwrap() + 0.24).abs() < 1e-12);
    assert!((s["J_tilde"].as_f64().unwrap() - 0.04 / 3.0).abs() < 1e-12);
}

#[test]
fn sdrg_strong_coupling_warns_but_succeeds() {
    let out = run(&["sdrg", "--k", "2", "--layers", "2", "--alpha", "0.2"]);
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("warning"), "{stderr}");
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!v[0]["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn sdrg_sweep_in_input_order() {
    let rows = csv_rows(&ok(&[
        "sdrg", "--k", "2", "--layers", "3", "--alpha", "0.001,0.01,0.005", "--format", "csv",
    ]));
    assert_eq!(rows.len(), 6);
    let alphas: Vec<f64> = rows.iter().map(|r| num(r, "alpha")).collect();
    assert_eq!(alphas, vec![0.001, 0.001, 0.01, 0.01, 0.005, 0.005]);
    for r in &rows {
        let a = num(r, "alpha");
        let expected = if r["layer"] == "1" { a } else { a * a };
        assert!((num(r, "J_tilde") - expected).abs() < 1e-10 * expected, "{r:?}");
    }
}

#[test]
fn analytic_radial_entropy() {
    let rows = csv_rows(&ok(&[
        "entropy", "--analytic", "--k", "3", "--layers", "2", "--cut", "radial:1,1", "--cut", "radial:2,2",
    ]));
    assert!((num(&rows[0], "entropy") - 2.0 * 4f64.ln()).abs() < 4.0 * f64::EPSILON);
    assert!((num(&rows[1], "entropy") - 2.0 * 6f64.ln()).abs() < 1e-12);
    assert_eq!(rows[0]["alpha"], "");
    assert_eq!(rows[0]["fidelity"], "");
}

#[test]
fn analytic_entropy_base_colors() {
    let rows = csv_rows(&ok(&[
        "entropy", "--analytic", "--k", "2", "--layers", "3", "--cut", "even-odd", "--cut", "concentric:2", "--base",
        "k+1",
    ]));
    assert!((num(&rows[0], "entropy") - 3.0).abs() < 1e-12);
    assert!(num(&rows[1], "entropy").abs() < 1e-12);
}

#[test]
fn exact_entropy_approaches_singlets() {
    let rows = csv_rows(&ok(&[
        "entropy", "--k", "2", "--layers", "2", "--alpha", "0.0001", "--cut", "even-odd", "--cut", "concentric:1",
    ]));
    let target = 2.0 * 3f64.ln();
    assert!((num(&rows[0], "entropy") - target).abs() <= 0.05, "{rows:?}");
    assert!(num(&rows[1], "entropy") <= 0.05, "{rows:?}");
    assert!(num(&rows[0], "fidelity") > 0.99);
}

#[test]
fn exact_entropy_columns() {
    let rows = csv_rows(&ok(&["entropy", "--k", "2", "--layers", "2", "--alpha", "0.01", "--cut", "even-odd"]));
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!(r["k"], "2");
    assert_eq!(r["layers"], "2");
    assert_eq!(r["cut"], "even-odd");
    assert!((num(r, "E0") - (-3.1370065285927824)).abs() < 1e-9);
    let f = num(r, "fidelity");
    assert!(f > 0.85 && f < 1.0);
    let s = num(r, "entropy");
    assert!(s > 0.0 && s < 2.0 * 3f64.ln());
}

#[test]
fn floats_have_17_significant_digits() {
    let text = ok(&["sdrg", "--k", "2", "--layers", "2", "--alpha", "0.01", "--format", "csv"]);
    let row = &csv_rows(&text)[0];
    for key in ["J", "J_tilde", "shift", "gap"] {
        let mantissa = row[key].split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{key}: {}", row[key]);
    }
}

fn write_to(path: &Path, args: &[&str], workers: &str) -> Output {
    let mut full = args.to_vec();
    let p = path.to_str().unwrap();
    full.extend(["--out", p]);
    run_with(&full, &[("MATRYOSHKA_WORKERS", workers)])
}

#[test]
fn output_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "entropy", "--k", "2", "--layers", "2", "--alpha", "0.05,0.01,0.002", "--cut", "even-odd", "--cut",
        "concentric:1", "--solver", "iterative", "--seed", "7",
    ];
    let mut outputs = Vec::new();
    for (i, workers) in ["1", "3", "1"].iter().enumerate() {
        let path = dir.path().join(format!("run{i}.csv"));
        let out = write_to(&path, &args, workers);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let rows = csv_rows(std::str::from_utf8(&outputs[0]).unwrap());
    let alphas: Vec<f64> = rows.iter().map(|r| num(r, "alpha")).collect();
    assert_eq!(alphas, vec![0.05, 0.05, 0.01, 0.01, 0.002, 0.002]);
}

#[test]
fn invalid_sweep_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = write_to(
        &path,
        &["entropy", "--k", "2", "--layers", "2", "--alpha", "0.01,2.0", "--cut", "even-odd"],
        "2",
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!path.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn numerical_failure_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spectrum.csv");
    let out = write_to(
        &path,
        &[
            "spectrum", "--k", "2", "--layers", "2", "--alpha", "0.01", "--lowest", "1", "--solver", "iterative",
            "--tol", "1e-300",
        ],
        "1",
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn out_replaces_existing_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lattice.json");
    std::fs::write(&path, "stale").unwrap();
    let out = write_to(&path, &["lattice", "--k", "2", "--layers", "1", "--alpha", "0.1"], "1");
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["sites"].as_array().unwrap().len(), 3);
}
