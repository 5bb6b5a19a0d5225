use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gxe_core::data::write_dataset;
use gxe_core::simulation::{generate_case_control, Scenario};
use gxe_core::stats::logit;
use serde_json::Value;

fn gxe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gxe"))
        .args(args)
        .env_remove("GXE_THREADS")
        .output()
        .expect("binary runs")
}

fn write_null_data(path: &Path, seed: u64, n: usize) {
    let sc = Scenario::binary(0.3, 0.3, logit(0.05), 0.4, 0.4, 0.0).with_sizes(n, n);
    let ds = generate_case_control(&sc, seed, 0, 0).unwrap();
    write_dataset(&ds, fs::File::create(path).unwrap()).unwrap();
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr).trim_end().to_string();
    assert_eq!(text.lines().count(), 1, "diagnostic should be one line: {text:?}");
    assert!(text.starts_with("error:"), "{text}");
    text
}

#[test]
fn help_and_version_need_no_input() {
    for flag in ["--help", "--version"] {
        let out = gxe(&[flag]);
        assert!(out.status.success());
        assert!(!out.stdout.is_empty());
    }
    for sub in ["test", "reri", "simulate", "summarize"] {
        assert!(gxe(&[sub, "--help"]).status.success());
    }
}

#[test]
fn usage_errors_exit_two_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_null_data(&data, 1, 200);
    let data = data.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["test"],
        vec!["test", "--data", data, "--no-such-flag"],
        vec!["test", "--data", data, "--variance", "bootstrap"],
        vec!["test", "--data", data, "--variance", "jackknife"],
        vec!["test", "--data", data, "--bootstrap", "10"],
        vec!["test", "--data", data, "--schema", "s.txt", "--a1", "g"],
        vec!["simulate", "--grid", "builtin:size", "--reps", "10"],
        vec!["simulate", "--grid", "builtin:size", "--tests", "u,han"],
    ];
    for args in cases {
        let out = gxe(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        stderr_line(&out);
    }
}

#[test]
fn computation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = gxe(&["test", "--data", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    stderr_line(&out);

    let only_cases = dir.path().join("cases.csv");
    fs::write(&only_cases, "d,g,e\n1,0,1\n1,1,0\n1,1,1\n").unwrap();
    let out = gxe(&["test", "--data", only_cases.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    stderr_line(&out);
}

#[test]
fn independence_gives_zero_v3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_null_data(&data, 2, 400);
    let out = gxe(&["test", "--data", data.to_str().unwrap(), "--independence"]);
    let json = json_of(&out);
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["method"], "binary-independent");
    assert_eq!(json["v3"], 0.0);
    for field in ["statistic", "p_value", "variance_total", "v1", "v2", "n", "n_cases"] {
        assert!(json[field].is_number(), "{field}");
    }
}

#[test]
fn output_file_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_null_data(&data, 3, 300);
    let target = dir.path().join("result.csv");
    let out = gxe(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--format",
        "csv",
        "--output",
        target.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("p_value"));
    let csv = fs::read_to_string(&target).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("schema_version,method,statistic,p_value"));
}

#[test]
fn bootstrap_is_reproducible_from_seed() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_null_data(&data, 4, 200);
    let data = data.to_str().unwrap();
    let run = |threads: &str| {
        json_of(&gxe(&[
            "--threads", threads, "test", "--data", data, "--bootstrap", "200", "--seed", "9",
        ]))
    };
    let a = run("1");
    let b = run("3");
    assert_eq!(a, b);
    assert_eq!(a["bootstrap_replicates"], 200);
}

#[test]
fn simulate_twice_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.txt");
    fs::write(&grid, "# one null cell\nlabel=null p_g=0.5 p_e=0.2 alpha1=log(2) alpha2=log(2) reri=0 n_cases=300 n_controls=300\n").unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let csv = dir.path().join(format!("run{k}.csv"));
        let summary = dir.path().join(format!("run{k}.json"));
        let out = gxe(&[
            "simulate",
            "--grid",
            grid.to_str().unwrap(),
            "--reps",
            "200",
            "--seed",
            "17",
            "--output",
            csv.to_str().unwrap(),
            "--summary",
            summary.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let summary: Value = serde_json::from_str(&fs::read_to_string(summary).unwrap()).unwrap();
        assert_eq!(summary["rows"].as_array().unwrap().len(), 3);
        outputs.push(fs::read_to_string(csv).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].lines().count(), 4);
}

#[test]
fn null_datasets_rarely_reject() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let (mut reri_keep, mut test_keep) = (0, 0);
    for seed in 0..100 {
        write_null_data(&data, 1000 + seed, 300);
        let path = data.to_str().unwrap();
        let reri = json_of(&gxe(&["reri", "--data", path]));
        let test = json_of(&gxe(&["test", "--data", path]));
        reri_keep += usize::from(reri["p_value"].as_f64().unwrap() > 0.05);
        test_keep += usize::from(test["p_value"].as_f64().unwrap() > 0.05);
    }
    assert!(reri_keep >= 90, "reri kept {reri_keep} of 100");
    assert!(test_keep >= 90, "test kept {test_keep} of 100");
}

#[test]
fn summarize_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_null_data(&data, 5, 150);
    let json = json_of(&gxe(&["summarize", "--data", data.to_str().unwrap()]));
    assert_eq!(json["cases"], 150);
    assert_eq!(json["controls"], 150);
    assert_eq!(json["usable_for_testing"], true);
}
