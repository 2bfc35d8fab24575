use std::process::{Command, Output};

use serde_json::Value;

fn pairlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairlab")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = pairlab(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

/// Splits CSV output into its `# key=value` header and data records.
fn csv_parts(text: &str) -> (Vec<(String, String)>, Vec<csv::StringRecord>, csv::StringRecord) {
    let meta = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.trim_start_matches('#').trim().split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    let body: String = text.lines().skip_while(|l| l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().unwrap().clone();
    (meta, rdr.records().map(|r| r.unwrap()).collect(), header)
}

#[test]
fn documented_examples() {
    assert_eq!(json(&["dim-bound", "--d", "2", "--eps", "1"])["bound"], 0.8);
    assert_eq!(json(&["r2", "--spec", "mono:2", "--N", "4", "--alpha", "0/1", "--s", "1"])["value"], 3.0);
    assert_eq!(json(&["energy", "--set", "1,2,3"])["E"], 19);
}

#[test]
fn json_carries_version_command_and_config() {
    let v = json(&["energy", "--spec", "ap:1:1", "--N", "10", "--algorithm", "oracle"]);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["command"], "energy");
    assert_eq!(v["config"]["spec"], "ap:1:1");
    assert_eq!(v["config"]["N"], 10);
    assert_eq!(v["config"]["algorithm"], "oracle");
    assert_eq!(v["E"], 670);
}

#[test]
fn csv_round_trip_matches_json() {
    let args = ["energy-scan", "--spec", "mono:2", "--Ns", "16,32,64,128"];
    let j = json(&args);
    let text = stdout(&[&args[..], &["--format", "csv"]].concat());
    let (meta, rows, header) = csv_parts(&text);
    assert!(meta.contains(&("command".into(), "energy-scan".into())));
    assert!(meta.contains(&("spec".into(), "mono:2".into())));
    assert_eq!(header.iter().collect::<Vec<_>>(), ["N", "E", "log2n", "log2e"]);
    let json_rows = j["rows"].as_array().unwrap();
    assert_eq!(rows.len(), json_rows.len());
    for (r, jr) in rows.iter().zip(json_rows) {
        assert_eq!(r[0].parse::<u64>().unwrap(), jr["N"].as_u64().unwrap());
        assert_eq!(r[1], jr["E"].to_string());
        assert_eq!(r[3].parse::<f64>().unwrap(), jr["log2e"].as_f64().unwrap());
    }
}

#[test]
fn single_result_csv_is_one_flat_row() {
    let (_, rows, header) = csv_parts(&stdout(&["bourgain-lemma", "--N", "256", "--K", "2", "--seed", "3", "--format", "csv"]));
    assert_eq!(rows.len(), 1);
    let cols: Vec<&str> = header.iter().collect();
    assert!(cols.contains(&"pass_all"));
    assert!(cols.contains(&"energy_bound.ratio"));
}

#[test]
fn empty_campaign_keeps_header() {
    let (_, rows, header) = csv_parts(&stdout(&["bourgain-campaign", "--schedule", "", "--format", "csv"]));
    assert!(rows.is_empty());
    assert_eq!(header.iter().collect::<Vec<_>>(), pairlab::bourgain::CAMPAIGN_HEADER);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| pairlab(args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["energy", "--set", "1,2,x"]), 2);
    assert_eq!(code(&["energy", "--set", "2,2"]), 2);
    assert_eq!(code(&["r2", "--set", "1,2,3", "--alpha", "1/2", "--s", "2"]), 2);
    assert_eq!(code(&["gcdsum", "--m", "3,3"]), 2);
    assert_eq!(code(&["energy", "--set", "1,2", "--threads", "0"]), 2);
    assert_eq!(code(&["dim-bound", "--d", "1", "--eps", "0.5", "--out", "/nonexistent/dir/out.json"]), 1);
    let err = pairlab(&["gcdsum", "--m", "3,3"]);
    assert!(String::from_utf8_lossy(&err.stderr).starts_with("error:"));
    assert!(err.stdout.is_empty());
}

#[test]
fn out_flag_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let printed = stdout(&["gcdsum", "--m", "2,3", "--out", out.to_str().unwrap()]);
    assert!(printed.is_empty());
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((saved["value"].as_f64().unwrap() - (1.0 + 1.0 / 6f64.sqrt())).abs() < 1e-12);

    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# a comment line\ncommand=energy\nspec=mono:2\nN=50\n").unwrap();
    let v = json(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(v["N"], 50);
    let v = json(&["--config", cfg.to_str().unwrap(), "energy", "--N", "20"]);
    assert_eq!(v["N"], 20);
}

#[test]
fn thread_env_does_not_change_output() {
    let args = ["variance", "--spec", "mono:2", "--N", "300", "--samples", "40", "--seed", "2"];
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_pairlab")).args(args).env("PAIRLAB_THREADS", threads).output().unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run("1"), run("5"));
}

#[test]
fn every_subcommand_runs() {
    let runs: &[&[&str]] = &[
        &["gen", "--spec", "ps:1:13/10", "--N", "20"],
        &["gaps", "--spec", "mono:1", "--N", "30", "--alpha", "random:1"],
        &["autocorr", "--set", "1,2,5,11"],
        &["rz-count", "--spec", "mono:2", "--N", "20", "--M", "3"],
        &["gcdsum", "--m", "1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20", "--kappa", "1"],
        &["coeff-check", "--pairs", "2:3", "--shells", "full,1", "--N", "100"],
        &["variance", "--spec", "mono:2", "--N", "40", "--samples", "5", "--kappa-hat", "1"],
        &["mean-check", "--spec", "mono:2", "--N", "10"],
        &["bourgain-blowup", "--N", "1024", "--K", "3", "--alpha-mode", "near"],
        &["measure-check", "--set", "1,2,3,4", "--eps", "0.2", "--samples", "1000"],
    ];
    for args in runs {
        let v = json(args);
        assert_eq!(v["command"], args[0]);
    }
    assert_eq!(json(&["autocorr", "--set", "1,2,5,11"])["E"], 28);
}
