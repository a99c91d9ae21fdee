//! Runs the `mallows` binary against the bundled fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mallows_core::ingest::{aggregate, fixture_path, load_microdata_csv, AggregateOptions};
use mallows_core::moments::{cov_model7, frobenius_diff, symbolic_covariance};
use mallows_core::{Divisor, LatentDistribution};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    fixture_path(name).expect("bundled fixture")
}

fn mallows(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mallows"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_json(o: &Output, code: i32) -> Value {
    assert_eq!(
        o.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: Value = serde_json::from_slice(&o.stderr).expect("error JSON on stderr");
    assert_eq!(v["error"]["exit_code"], code);
    v
}

fn parse_matrix(csv: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = csv.lines();
    let names = lines.next().unwrap().split(',').skip(1).map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').skip(1).map(|x| x.parse().unwrap()).collect())
        .collect();
    (names, rows)
}

/// Writes the synthetic flights fixture as an interval CSV and returns its path.
fn flights_intervals(dir: &Path) -> PathBuf {
    let flights = fixture("flights_synthetic.csv");
    let o = mallows(&[
        "aggregate",
        "--microdata",
        flights.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    stdout(&o);
    dir.join("intervals.csv")
}

#[test]
fn aggregate_is_deterministic_and_reports_drops() {
    let flights = fixture("flights_synthetic.csv");
    let args = ["aggregate", "--microdata", flights.to_str().unwrap(), "--trim", "0.05"];
    let first = stdout(&mallows(&args));
    assert_eq!(first, stdout(&mallows(&args)));
    assert!(first.starts_with("label,air_time.lo,air_time.hi,"));
    assert_eq!(first.lines().count(), 1 + 47);
    let dir = tempfile::tempdir().unwrap();
    let mut with_dir = args.to_vec();
    with_dir.extend(["--out-dir", dir.path().to_str().unwrap(), "--encoding", "centre-range"]);
    stdout(&mallows(&with_dir));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("aggregation_report.json")).unwrap()).unwrap();
    assert_eq!(report["groups_out"], 47);
    assert_eq!(report["dropped"][0]["group"], "03/DL");
    assert!(fs::read_to_string(dir.path().join("intervals.csv"))
        .unwrap()
        .contains("air_time.c,air_time.r"));
}

#[test]
fn covariance_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let intervals = flights_intervals(dir.path());
    let out = stdout(&mallows(&[
        "covariance",
        "--intervals",
        intervals.to_str().unwrap(),
        "--latent",
        "triangular:0",
    ]));
    let (names, rows) = parse_matrix(&out);
    let data = load_microdata_csv(fixture("flights_synthetic.csv")).unwrap();
    let mut frame = aggregate(&data.records, &AggregateOptions::default()).unwrap().frame;
    frame
        .set_latents(vec![LatentDistribution::Triangular { mode: 0.0 }; 4])
        .unwrap();
    let cov = symbolic_covariance(&frame).unwrap();
    assert_eq!(names, frame.names());
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert!((v - cov.sigma_b[(i, j)]).abs() <= 1e-12 * cov.sigma_b[(i, j)].abs().max(1.0));
        }
    }
    let cor = stdout(&mallows(&[
        "correlation",
        "--intervals",
        intervals.to_str().unwrap(),
        "--latent",
        "triangular:0",
    ]));
    let (_, cor) = parse_matrix(&cor);
    for (i, row) in cor.iter().enumerate() {
        assert!((row[i] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn compare_against_model7() {
    let dir = tempfile::tempdir().unwrap();
    let intervals = flights_intervals(dir.path());
    let out = stdout(&mallows(&[
        "compare",
        "--intervals",
        intervals.to_str().unwrap(),
        "--divisor",
        "n-1",
    ]));
    let doc: Value = serde_json::from_str(&out).unwrap();
    let data = load_microdata_csv(fixture("flights_synthetic.csv")).unwrap();
    let frame = aggregate(&data.records, &AggregateOptions::default()).unwrap().frame;
    let summary = mallows_core::MomentSummary::from_latents(frame.latents());
    let cov = mallows_core::moments::symbolic_covariance_with(&frame, &summary, Divisor::NMinusOne).unwrap();
    let expected = frobenius_diff(&cov.sigma_b, &cov_model7(&frame, Divisor::NMinusOne).unwrap()).unwrap();
    assert_eq!(doc["reference"], "model7");
    let got = doc["frobenius_covariance"].as_f64().unwrap();
    assert!((got - expected).abs() <= 1e-12 * expected);
}

#[test]
fn ellipse_points_lie_on_the_iso_distance_set() {
    let out = stdout(&mallows(&[
        "ellipse", "--x0", "-3,5", "--delta", "0.08333", "--radius", "1", "--radius", "2",
    ]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("radius,centre,range"));
    let mut count = 0;
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        let level = (v[1] - 1.0).powi(2) + 0.08333 * (v[2] - 8.0).powi(2);
        assert!((level - v[0] * v[0]).abs() < 1e-9);
        count += 1;
    }
    assert_eq!(count, 800);
    let tri = stdout(&mallows(&[
        "ellipse",
        "--x0",
        "-3,5",
        "--latent",
        "triangular:0",
        "--points",
        "4",
    ]));
    assert!(tri.lines().nth(2).unwrap().starts_with("1,1,"));
    error_json(&mallows(&["ellipse", "--x0", "-3,5", "--latent", "triangular:0.5"]), 2);
}

#[test]
fn triangular_fits_from_summary_statistics() {
    let summary = fixture("rtt_summary.csv");
    let out = stdout(&mallows(&[
        "fit",
        "--summary",
        summary.to_str().unwrap(),
        "--latent",
        "fit:triangular-pearson",
    ]));
    let doc: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["n_rows"], 60);
    assert_eq!(doc["latents"]["rtt2"]["mode"], 0.0);
    assert_eq!(doc["latents"]["rtt8"]["mode"], 0.0);
    let rtt1 = doc["latents"]["rtt1"]["mode"].as_f64().unwrap();
    assert!((rtt1 + 0.14).abs() < 1e-9);
    let bad = mallows(&["fit", "--summary", summary.to_str().unwrap(), "--latent", "fit:beta"]);
    assert!(error_json(&bad, 2)["error"]["message"]
        .as_str()
        .unwrap()
        .contains("needs --microdata"));
}

#[test]
fn fitted_latents_round_trip_through_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let flights = fixture("flights_synthetic.csv");
    let fit_dir = dir.path().join("fit");
    stdout(&mallows(&[
        "fit",
        "--microdata",
        flights.to_str().unwrap(),
        "--trim",
        "0.05",
        "--latent",
        "fit:kde",
        "--latent-var",
        "dep_delay=fit:beta",
        "--out-dir",
        fit_dir.to_str().unwrap(),
    ]));
    let fit: Value = serde_json::from_str(&fs::read_to_string(fit_dir.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["latents"]["dep_delay"]["family"], "shifted_beta");
    assert_eq!(fit["latents"]["air_time"]["sample_path"], "samples/air_time.txt");
    assert!(fit_dir.join("samples/distance.txt").is_file());
    let config = serde_json::json!({
        "microdata": flights,
        "trim": 0.05,
        "latents": fit["latents"],
        "divisor": "n_minus_one",
    });
    let cfg_path = fit_dir.join("config.json");
    fs::write(&cfg_path, config.to_string()).unwrap();
    let refit: Value =
        serde_json::from_str(&stdout(&mallows(&["fit", "--config", cfg_path.to_str().unwrap()]))).unwrap();
    for v in ["air_time", "distance"] {
        assert_eq!(refit["latents"][v]["bandwidth"], fit["latents"][v]["bandwidth"]);
        assert_eq!(
            refit["variables"]
                .as_array()
                .unwrap()
                .iter()
                .find(|x| x["variable"] == v)
                .unwrap()["moments"],
            fit["variables"]
                .as_array()
                .unwrap()
                .iter()
                .find(|x| x["variable"] == v)
                .unwrap()["moments"]
        );
    }
    // Flags win over the file.
    let trimmed = stdout(&mallows(&[
        "fit",
        "--config",
        cfg_path.to_str().unwrap(),
        "--trim",
        "0.1",
    ]));
    let trimmed: Value = serde_json::from_str(&trimmed).unwrap();
    assert_eq!(trimmed["aggregation"]["trim"], 0.1);
}

#[test]
fn distance_barycentre_and_pairs_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let intervals = flights_intervals(dir.path());
    let path = intervals.to_str().unwrap();
    let d = stdout(&mallows(&["distance", "--intervals", path, "--threads", "1"]));
    let (labels, rows) = parse_matrix(&d);
    assert_eq!(labels.len(), 47);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[i], 0.0);
        for (j, &d) in row.iter().enumerate() {
            assert_eq!(d, rows[j][i]);
        }
    }
    let b: Value = serde_json::from_str(&stdout(&mallows(&["barycentre", "--intervals", path]))).unwrap();
    assert_eq!(b["variables"].as_array().unwrap().len(), 4);
    assert!(b["frechet_variance"].as_f64().unwrap() > 0.0);
    let pairs = stdout(&mallows(&[
        "pairs-data",
        "--intervals",
        path,
        "--pair",
        "dep_delay,arr_delay",
    ]));
    assert_eq!(pairs.lines().count(), 1 + 47 + 1);
    assert!(pairs
        .lines()
        .last()
        .unwrap()
        .starts_with("dep_delay,arr_delay,barycentre,barycentre,"));
    let all = stdout(&mallows(&["pairs-data", "--intervals", path]));
    assert_eq!(all.lines().count(), 1 + 6 * 48);
}

#[test]
fn failures_exit_with_codes_and_json() {
    let missing = mallows(&["covariance", "--intervals", "/nonexistent/intervals.csv"]);
    assert_eq!(error_json(&missing, 2)["error"]["kind"], "io");
    let usage = mallows(&["covariance", "--bogus"]);
    assert_eq!(error_json(&usage, 2)["error"]["kind"], "usage");
    let dir = tempfile::tempdir().unwrap();
    let intervals = flights_intervals(dir.path());
    let bad_latent = mallows(&[
        "distance",
        "--intervals",
        intervals.to_str().unwrap(),
        "--latent",
        "beta:-1,2",
    ]);
    assert_eq!(error_json(&bad_latent, 2)["error"]["kind"], "invalid_latent");
    // Two values per cell scale to the endpoints, where no Beta law matches
    // the sample moments.
    let micro = dir.path().join("two_point.csv");
    fs::write(&micro, "g,variable,value\na,x,0\na,x,1\nb,x,2\nb,x,5\n").unwrap();
    let numeric = mallows(&["fit", "--microdata", micro.to_str().unwrap(), "--latent", "fit:beta"]);
    assert_eq!(error_json(&numeric, 3)["error"]["kind"], "moment_condition");
    let mixed = dir.path().join("mixed.csv");
    fs::write(&mixed, "x.lo,x.hi\n0,1\n2,2\n1,3\n").unwrap();
    error_json(&mallows(&["barycentre", "--intervals", mixed.to_str().unwrap()]), 2);
    let dropped: Value = serde_json::from_str(&stdout(&mallows(&[
        "fit",
        "--intervals",
        mixed.to_str().unwrap(),
        "--drop-degenerate-rows",
    ])))
    .unwrap();
    assert_eq!(dropped["dropped_rows"][0], "2");
    assert_eq!(dropped["n_rows"], 2);
}
