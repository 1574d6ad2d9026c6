use std::process::Command as Process;

use clap::Parser;
use serde_json::Value;

use htm_cli::report::strip_timestamp;
use htm_cli::{run, Cli, CliError, Format};

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("htm").chain(args.iter().copied())).expect("arguments parse")
}

fn json(args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.extend(["--format", "json"]);
    let out = run(&cli(&a)).unwrap_or_else(|e| panic!("{args:?}: {e}"));
    serde_json::from_str(&out.rendered).unwrap()
}

fn column(table: &Value, name: &str) -> Vec<Value> {
    let j = table["columns"]
        .as_array()
        .unwrap()
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    table["rows"].as_array().unwrap().iter().map(|r| r[j].clone()).collect()
}

fn table<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["tables"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["name"] == name)
        .unwrap_or_else(|| panic!("no table {name}"))
}

fn exit_code(args: &[&str]) -> i32 {
    Process::new(env!("CARGO_BIN_EXE_htm"))
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

#[test]
fn power_kernel_at_unit_exponent_is_lrd() {
    let r = json(&["classify", "--kernel", "power:C=1,delta=1.0,a=1", "--alpha", "1.56"]);
    assert_eq!(r["summary"]["verdict"], "LRD");
    assert_eq!(r["config"]["alpha"], 1.56);
}

#[test]
fn steep_power_kernel_is_srd() {
    let r = json(&["classify", "--kernel", "power:C=1,delta=1.5,a=1", "--alpha", "1.56"]);
    assert_eq!(r["summary"]["verdict"], "SRD");
}

#[test]
fn brown_resnick_log_variogram_verdicts() {
    let r = json(&["maxstable", "--model", "br:gamma=12*log1p(|t|)"]);
    assert_eq!(r["summary"]["verdict"], "SRD");
    let r = json(&["maxstable", "--model", "br:gamma=4*log1p(|t|)"]);
    assert_eq!(r["summary"]["verdict"], "LRD");
    let theta = column(table(&r, "extremal"), "theta");
    assert!(theta.iter().all(|t| (1.0..=2.0).contains(&t.as_f64().unwrap())));
}

#[test]
fn compact_kernel_has_no_covariance_beyond_support() {
    let r = json(&[
        "excursion",
        "--kernel",
        "indicator",
        "--measure",
        "mix:-0.5:0.3,0.7:0.7",
        "--lags",
        "1,2.5,10",
        "--mc-paths",
        "20000",
    ]);
    let t = table(&r, "excursion");
    for v in column(t, "covariance") {
        assert!(v.as_f64().unwrap().abs() <= 1e-8, "{v}");
    }
    assert!(column(t, "agree").iter().all(|a| a == true));
}

#[test]
fn reports_are_reproducible_up_to_the_timestamp() {
    let runs: &[&[&str]] = &[
        &["simulate", "--n", "300"],
        &["classify"],
        &["excursion", "--lags", "1", "--mc-paths", "5000"],
        &["maxstable"],
        &["fit"],
        &["bootstrap", "--reps", "8", "--n", "400", "--lags", "10"],
    ];
    for args in runs {
        for fmt in ["text", "json", "table"] {
            let mut a = args.to_vec();
            a.extend(["--seed", "11", "--format", fmt]);
            let x = run(&cli(&a)).unwrap().rendered;
            let y = run(&cli(&a)).unwrap().rendered;
            assert_eq!(strip_timestamp(&x), strip_timestamp(&y), "{args:?} {fmt}");
        }
    }
}

#[test]
fn bootstrap_does_not_depend_on_threads() {
    let base = ["bootstrap", "--reps", "6", "--n", "400", "--lags", "10", "--format", "json"];
    let mut one = base.to_vec();
    one.extend(["--threads", "1"]);
    let mut three = base.to_vec();
    three.extend(["--threads", "3"]);
    let a = run(&cli(&one)).unwrap().rendered;
    let b = run(&cli(&three)).unwrap().rendered;
    assert_eq!(strip_timestamp(&a), strip_timestamp(&b));
}

#[test]
fn reproduce_emits_a_boxplot_per_lag() {
    let r = json(&["reproduce", "--reps", "12", "--seed", "3"]);
    let b = table(&r, "boxplot");
    let lags: Vec<u64> = column(b, "lag").iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(lags, (1..=25).collect::<Vec<_>>());
    let q: Vec<Vec<f64>> = ["q05", "q25", "q50", "q75", "q95"]
        .iter()
        .map(|c| column(b, c).iter().map(|v| v.as_f64().unwrap()).collect())
        .collect();
    for k in 0..25 {
        assert!((0..4).all(|i| q[i][k] <= q[i + 1][k]), "lag {}", k + 1);
    }
    assert_eq!(table(&r, "quantiles")["rows"].as_array().unwrap().len(), 25 * 5);
    assert!(r["summary"]["dataset"].as_str().unwrap().contains("synthetic"));
    assert!(r["summary"]["std_delta"].as_f64().unwrap() > 0.0);
}

#[test]
fn fit_reads_a_user_file() {
    let dir = tempfile::tempdir().unwrap();
    let src = htm_cli::data::synthetic_dataset().unwrap();
    let mut csv = String::from("date,ret\n");
    for (d, v) in src.dates.as_ref().unwrap().iter().zip(&src.values) {
        csv.push_str(&format!("{d},{v:e}\n"));
    }
    let path = dir.path().join("returns.csv");
    std::fs::write(&path, csv).unwrap();
    let mine = json(&["fit", "--data", path.to_str().unwrap(), "--column", "ret"]);
    let bundled = json(&["fit"]);
    for key in ["alpha_hat", "delta_hat", "c_hat"] {
        assert_eq!(mine["summary"][key], bundled["summary"][key], "{key}");
    }
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("htm.toml");
    std::fs::write(&cfg, "alpha = 1.2\nkernel = \"power:C=1,delta=1.5,a=1\"\nseed = 9\n").unwrap();
    let c = cfg.to_str().unwrap();
    let r = json(&["classify", "--config", c]);
    assert_eq!(r["config"]["alpha"], 1.2);
    assert_eq!(r["seed"], 9);
    // delta 1.5 < 2/1.2: long memory
    assert_eq!(r["summary"]["verdict"], "LRD");
    let r = json(&["classify", "--config", c, "--alpha", "1.56", "--seed", "4"]);
    assert_eq!(r["config"]["alpha"], 1.56);
    assert_eq!(r["seed"], 4);
    assert_eq!(r["summary"]["verdict"], "SRD");

    std::fs::write(&cfg, "alhpa = 1.2\n").unwrap();
    assert!(matches!(run(&cli(&["classify", "--config", c])), Err(CliError::Config(_))));
}

#[test]
fn out_directory_receives_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("out");
    let out = run(&cli(&["maxstable", "--out", d.to_str().unwrap()])).unwrap();
    assert_eq!(out.written, ["maxstable.json", "maxstable.txt", "maxstable_diagnostics.csv", "maxstable_extremal.csv"]);
    let csv = std::fs::read_to_string(d.join("maxstable_extremal.csv")).unwrap();
    assert!(csv.starts_with("lag,theta,"));
    let text = std::fs::read_to_string(d.join("maxstable.txt")).unwrap();
    assert_eq!(text, out.report.render(Format::Text));
}

#[test]
fn exit_codes_follow_error_class() {
    assert_eq!(exit_code(&["classify", "--kernel", "power:C=1,delta=1,a=1", "--alpha", "1.56"]), 0);
    assert_eq!(exit_code(&["classify", "--alpha", "2.5"]), 2);
    assert_eq!(exit_code(&["classify", "--kernel", "wave:x=1"]), 2);
    assert_eq!(exit_code(&["excursion", "--tol", "1e-300", "--mc-paths", "0", "--lags", "1"]), 3);
    assert_eq!(exit_code(&["fit", "--data", "/nonexistent/prices.csv"]), 4);
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.csv");
    std::fs::write(&short, "open\n1\n2\n3\n").unwrap();
    assert_eq!(exit_code(&["fit", "--data", short.to_str().unwrap()]), 4);
}
