use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn trialmon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trialmon"))
        .args(args)
        .env_remove("TRIALMON_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn error_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr)
        .unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn boundary_max_n_gives_one_row_per_n() {
    let out = stdout(&trialmon(&["boundary", "--max-n", "10"]));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[2][0], "3");
    assert_eq!(rows[2][1], "3");
}

#[test]
fn flat_prior_changes_boundary() {
    let default = csv_rows(&stdout(&trialmon(&["boundary", "--max-n", "10"])));
    let flat = csv_rows(&stdout(&trialmon(&["boundary", "--max-n", "10", "--prior", "1,1"])));
    let col = |rows: &[Vec<String>]| rows.iter().map(|r| r[1].clone()).collect::<Vec<_>>();
    assert_ne!(col(&default), col(&flat));
    // a flat prior carries no optimism, so one failure in one patient already stops
    assert_eq!(flat[0][1], "1");
    assert_eq!(default[0][1], "");
}

#[test]
fn grouped_boundary_merges_rows() {
    let rows = csv_rows(&stdout(&trialmon(&["boundary", "--max-n", "78", "--grouped"])));
    assert!(rows.len() < 78);
    assert_eq!(rows.last().unwrap()[1], "13");
}

#[test]
fn single_threshold_timing() {
    let out = stdout(&trialmon(&["timing", "--thresholds", "0.5"]));
    let mut r = csv::Reader::from_reader(out.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, ["quantity", "early", "threshold 0.5"]);
}

fn timing_months(extra: &[&str]) -> Vec<u32> {
    let mut args = vec!["timing"];
    args.extend_from_slice(extra);
    let rows = csv_rows(&stdout(&trialmon(&args)));
    rows.iter().find(|r| r[0] == "month").unwrap()[1..].iter().map(|m| m.parse().unwrap()).collect()
}

#[test]
fn faster_recruitment_brings_analyses_forward() {
    let base = timing_months(&[]);
    let fast = timing_months(&["--recruitment-multiplier", "2"]);
    let slow = timing_months(&["--recruitment-multiplier", "0.5"]);
    assert_eq!(base.len(), fast.len());
    for ((b, f), s) in base.iter().zip(&fast).zip(&slow) {
        assert!(f <= b && s >= b, "base {base:?} fast {fast:?} slow {slow:?}");
    }
}

#[test]
fn simulate_is_deterministic() {
    let args = ["simulate", "--replicates", "1", "--seed", "11", "--analysis-months", "7,10,13,18"];
    let a = stdout(&trialmon(&args));
    let b = stdout(&trialmon(&args));
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["replicates"], 1);
    for g in v["groups"].as_array().unwrap() {
        for p in g["cumulative_stop"].as_array().unwrap() {
            let p = p.as_f64().unwrap();
            assert!(p == 0.0 || p == 1.0);
        }
    }
}

#[test]
fn out_dir_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let d = dir.path().join(sub);
        let o = Command::new(env!("CARGO_BIN_EXE_trialmon"))
            .args(["simulate", "--replicates", "50", "--seed", "5", "--analysis-months", "7,10,13,18"])
            .env("TRIALMON_OUT_DIR", &d)
            .output()
            .unwrap();
        assert!(o.status.success());
        assert!(o.stdout.is_empty());
        d
    };
    let (a, b) = (run("a"), run("b"));
    for name in ["stop_report.json", "stop_report.csv", "cumulative_stop.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn flag_out_dir_overrides_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_trialmon"))
        .args(["--out-dir"])
        .arg(dir.path().join("flag"))
        .arg("samplesize")
        .env("TRIALMON_OUT_DIR", dir.path().join("env"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("flag/samplesize.json").exists());
    assert!(!Path::new(&dir.path().join("env")).exists());
}

#[test]
fn elicit_and_samplesize() {
    let v: Value =
        serde_json::from_str(&stdout(&trialmon(&["elicit", "--mean", "0.9", "--threshold", "0.9", "--tail", "0.34"])))
            .unwrap();
    assert_eq!(v["displayed"][0].as_f64().unwrap(), 4.5);
    assert_eq!(v["displayed"][1].as_f64().unwrap(), 0.5);
    let v: Value = serde_json::from_str(&stdout(&trialmon(&["samplesize"]))).unwrap();
    assert_eq!(v["n"], 39);
}

#[test]
fn dataset_then_analyse() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    std::fs::write(&data, stdout(&trialmon(&["dataset", "--seed", "4"]))).unwrap();
    let v: Value = serde_json::from_str(&stdout(&trialmon(&["analyse", "--data", data.to_str().unwrap()]))).unwrap();
    assert!(v["fit"]["marginal"].as_array().unwrap().len() >= 3);
    assert!(!v["comparisons"].as_array().unwrap().is_empty());
}

#[test]
fn validate_only() {
    let o = trialmon(&["--validate-only", "power"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["valid"], true);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[rule]\nnot_a_key = 1\n").unwrap();
    let o = trialmon(&["--config", cfg.to_str().unwrap(), "boundary"]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["exit_code"], 2);
    assert!(e["message"].as_str().unwrap().contains("not_a_key"));

    let o = trialmon(&["simulate", "--true-cure", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["exit_code"], 2);

    let o = trialmon(&["boundary", "--max-n", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_errors_exit_3() {
    // strategy 1 never cures and everyone else always does: perfect separation
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let mut text = String::from("regimen,strategy,ribavirin,stratum,outcome\n");
    for reg in 0..2 {
        for s in 0..4 {
            for st in 0..2 {
                for r in if s == 0 { vec![""] } else { vec!["0", "1"] } {
                    let outcome = u8::from(s != 1);
                    text += &format!("{reg},{s},{r},{st},{outcome}\n");
                }
            }
        }
    }
    std::fs::write(&data, text).unwrap();
    let o = trialmon(&["analyse", "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_json(&o)["exit_code"], 3);
}
