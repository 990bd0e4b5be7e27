//! End-to-end tests of the command-line interface.

use std::path::Path;
use std::process::Command;

fn gsmap() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gsmap"))
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn example_a_writes_csv_with_stable_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results.csv");
    let status = gsmap()
        .args([
            "example-a",
            "--seed",
            "7",
            "--trials",
            "16",
            "--sizes",
            "16,24",
            "--estimators",
            "lmmse,gsp-lmmse,egfd-map",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read_csv(&out);
    assert_eq!(
        rows[0],
        vec![
            "scenario", "point", "estimator", "metric", "mean", "stderr", "time_mean",
            "iters_mean", "diverged"
        ]
    );
    // Two grid points x three estimators.
    assert_eq!(rows.len(), 1 + 6);
    for row in &rows[1..] {
        assert_eq!(row.len(), 9);
        assert_eq!(row[0], "example-a-nmse");
        assert_eq!(row[3], "nmse");
    }
}

#[test]
fn identical_seeds_give_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for (out, workers) in [(&out_a, "1"), (&out_b, "4")] {
        let status = gsmap()
            .args([
                "example-a",
                "--seed",
                "11",
                "--trials",
                "12",
                "--sizes",
                "16",
                "--workers",
                workers,
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = read_csv(&out_a);
    let b = read_csv(&out_b);
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        // All columns except the wall-time one must match bit for bit.
        for col in [0, 1, 2, 3, 4, 5, 7, 8] {
            assert_eq!(ra[col], rb[col]);
        }
    }
}

#[test]
fn psse_runs_on_external_case_file() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case.m");
    std::fs::write(
        &case,
        "\
mpc.bus = [
1 3 0 0 0 0 1 1.0 0 138 1 1.06 0.94;
2 1 0 0 0 0 1 1.0 0 138 1 1.06 0.94;
3 1 0 0 0 0 1 1.0 0 138 1 1.06 0.94;
4 1 0 0 0 0 1 1.0 0 138 1 1.06 0.94;
];
mpc.branch = [
1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360;
2 3 0.01 0.12 0 0 0 0 0 0 1 -360 360;
3 4 0.02 0.15 0 0 0 0 0 0 1 -360 360;
1 4 0.01 0.2 0 0 0 0 0 0 1 -360 360;
];
",
    )
    .unwrap();
    let out = dir.path().join("psse.json");
    let status = gsmap()
        .args([
            "psse",
            "--seed",
            "3",
            "--trials",
            "8",
            "--grid",
            "0.05",
            "--estimators",
            "gsp-lmmse,map-freq",
            "--format",
            "json",
            "--case",
        ])
        .arg(&case)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert_eq!(row["metric"], "nmspe");
        assert!(row["mean"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn config_file_overrides_scenario_shape() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.json");
    std::fs::write(
        &config,
        r#"{
  "kind": "ExampleANmseVsN",
  "grid": [18.0],
  "trials": 99,
  "seed": 1,
  "estimators": ["Lmmse"],
  "init": "GspLmmse"
}"#,
    )
    .unwrap();
    let out = dir.path().join("out.csv");
    let status = gsmap()
        .args(["example-a", "--seed", "5", "--trials", "6", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read_csv(&out);
    // Grid and estimator list come from the config; seed/trials from flags.
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][1], "18");
    assert_eq!(rows[1][2], "lmmse");
}

#[test]
fn bench_emits_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.json");
    let status = gsmap()
        .args(["bench", "--sizes", "8,12,16", "--repeats", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["sizes"].as_array().unwrap().len(), 3);
    assert_eq!(report["entries"].as_array().unwrap().len(), 4);
}

#[test]
fn case_info_reports_bundled_sizes() {
    let output = gsmap().args(["case-info", "--bus57"]).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("buses:            57"));
}

#[test]
fn bad_arguments_exit_nonzero() {
    let output = gsmap()
        .args(["example-a", "--seed", "1", "--estimators", "nonsense"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8(output.stderr).unwrap();
    assert!(err.contains("unknown estimator"));

    // Seed is mandatory.
    let output = gsmap().args(["example-a"]).output().unwrap();
    assert!(!output.status.success());
}
