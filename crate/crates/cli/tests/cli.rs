use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sharedecomp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn shor_sgm_counts_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let json = dir.path().join("report.json");
    let o = run(&[
        "shor",
        "--method",
        "sgm",
        "--theta",
        "0.1",
        "--eps",
        "0.1,0.01,0.001,0.0001",
        "--csv",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for k in ["59", "251", "1409", "6727"] {
        assert!(out.contains(k), "{out}");
    }
    let trace = fs::read_to_string(&csv).unwrap();
    assert!(trace.starts_with("k,theta,f,best,elapsed_s\n0,0.1,80,80,"));
    assert_eq!(trace.lines().count(), 6729);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["experiment"], "shor");
    assert_eq!(report["rows"][0]["hits"][3]["iteration"], 6727);
}

#[test]
fn vacuous_target_takes_zero_iterations() {
    let o = run(&["shor", "--method", "sgm", "--eps", "1e9"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.trim_start().starts_with("1000000000")).unwrap();
    assert_eq!(line.split_whitespace().last(), Some("0"));
}

#[test]
fn sgmts_first_target() {
    let o = run(&["shor", "--method", "sgmts", "--nu", "0.7", "--d", "25", "--eps", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.trim_start().starts_with("0.1 ")).unwrap();
    let k: usize = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!(k <= 26, "{k}");
}

#[test]
fn declp_report_and_replay_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("declp.json");
    let csv = dir.path().join("declp.csv");
    let inst = dir.path().join("inst.json");
    let o = run(&[
        "declp",
        "--l",
        "2",
        "--budget",
        "2000",
        "--no-timing",
        "--json",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--save-instance",
        inst.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let d = &report["declp"];
    assert!(d["relative_gap"].as_f64().unwrap() <= 0.05);
    let ks: Vec<u64> = d["checkpoints"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["k"].as_u64().unwrap())
        .collect();
    assert_eq!(ks.len(), 41);
    assert!(ks.iter().enumerate().all(|(i, k)| *k == 50 * i as u64));
    assert!(report["timestamp"].is_null());
    assert!(fs::read_to_string(&inst).unwrap().contains("\"A\""));

    let csv2 = dir.path().join("again.csv");
    let json2 = dir.path().join("again.json");
    let r = run(&[
        "replay",
        json.to_str().unwrap(),
        "--csv",
        csv2.to_str().unwrap(),
        "--json",
        json2.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0));
    assert!(stdout(&r).contains("replay identical"));
    assert_eq!(fs::read(&csv).unwrap(), fs::read(&csv2).unwrap());
    assert_eq!(fs::read(&json).unwrap(), fs::read(&json2).unwrap());
}

#[test]
fn declp_budget_zero_reports_start() {
    let o = run(&["declp", "--l", "1", "--budget", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("last k 0"));
}

#[test]
fn declp_explicit_t_too_small_names_block() {
    let o = run(&["declp", "--l", "2", "--t", "0,0", "--budget", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("block"));
}

#[test]
fn verify_passes_and_flags_weak_penalty() {
    let o = run(&["verify", "--l", "1,2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("l=1") && out.contains("l=2") && out.contains("lambda*"));

    let weak = run(&["verify", "--l", "2", "--t", "3.5,0.1"]);
    assert_eq!(weak.status.code(), Some(2));
    assert!(stdout(&weak).contains("does not dominate"));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["shor", "--method", "newton"],
        vec!["shor", "--theta=-1"],
        vec!["declp"],
        vec!["declp", "--l", "0"],
        vec!["declp", "--l", "2", "--t", "1,x"],
        vec!["frobnicate"],
    ] {
        let o = run(&args);
        assert_eq!(
            o.status.code(),
            Some(1),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn replay_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, "{not json").unwrap();
    assert_eq!(run(&["replay", p.to_str().unwrap()]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["replay", missing.to_str().unwrap()]).status.code(), Some(2));
}
