use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cvfl::orchestrator::ExperimentConfig;

fn cvfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvfl"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn run_into(dir: &Path, args: &[&str]) {
    let out = dir.to_str().unwrap();
    let mut all = vec!["run"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", out]);
    let o = cvfl(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn same_seed_gives_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        run_into(d.path(), &["freeway", "--seed", "1", "--rounds", "4"]);
    }
    for file in ["summary.csv", "rounds.jsonl", "config.json"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file} differs"
        );
    }
}

#[test]
fn summary_has_one_row_per_round_and_finite_cells() {
    let d = tempfile::tempdir().unwrap();
    run_into(d.path(), &["parking-lot", "--rounds", "5"]);
    let rows = csv_rows(&d.path().join("summary.csv"));
    assert_eq!(rows.len(), 5);
    for row in &rows {
        for cell in &row[1..] {
            assert!(cell.parse::<f64>().unwrap().is_finite(), "{cell}");
        }
    }
    let lines = fs::read_to_string(d.path().join("rounds.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 5);
    let header = fs::read_to_string(d.path().join("summary.csv")).unwrap();
    assert!(header.starts_with("algorithm,round,vehicles,heads,members,participants,rbs_used,accuracy,loss\n"));
}

#[test]
fn baseline_adds_vanilla_rows() {
    let d = tempfile::tempdir().unwrap();
    run_into(d.path(), &["--preset", "freeway", "--rounds", "3", "--baseline"]);
    let rows = csv_rows(&d.path().join("summary.csv"));
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().filter(|r| r[0] == "vanilla").count(), 3);
    assert!(d.path().join("checkpoints/vanilla-v0.ckpt").exists());
}

#[test]
fn config_echo_round_trips() {
    let d = tempfile::tempdir().unwrap();
    run_into(
        d.path(),
        &["freeway", "--seed", "9", "--rounds", "2", "--total-rbs", "3", "--model-size-bits", "320000"],
    );
    let echo = fs::read_to_string(d.path().join("config.json")).unwrap();
    let parsed = ExperimentConfig::from_json(&echo).unwrap();
    assert_eq!(parsed.radio.total_rbs, 3);
    assert_eq!(parsed.radio.model_size_bits, 320e3);
    assert_eq!(parsed.rounds, 2);

    let again = tempfile::tempdir().unwrap();
    run_into(again.path(), &["--config", d.path().join("config.json").to_str().unwrap()]);
    assert_eq!(
        fs::read(d.path().join("rounds.jsonl")).unwrap(),
        fs::read(again.path().join("rounds.jsonl")).unwrap()
    );
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = cvfl(&["run", "freeway", "--no-such-flag"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn invalid_config_reports_its_line() {
    let d = tempfile::tempdir().unwrap();
    let text = ExperimentConfig::freeway()
        .to_json()
        .unwrap()
        .replacen("\"rounds\": 50", "\"rounds\": \"many\"", 1);
    let path = d.path().join("bad.json");
    fs::write(&path, text).unwrap();
    let o = cvfl(&["run", "--config", path.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");
    assert!(!d.path().join("rounds.jsonl").exists());
}

#[test]
fn unknown_preset_is_rejected() {
    let o = cvfl(&["run", "--preset", "autobahn"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown preset"));
}

#[test]
fn sweep_grid_rows_and_trends() {
    let d = tempfile::tempdir().unwrap();
    let path = d.path().join("sweep.csv");
    let o = cvfl(&["sweep", "freeway", "--repeats", "5", "--rounds", "20", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 9);
    let heads = |q: &str, s: &str| -> f64 {
        rows.iter().find(|r| r[0] == q && r[1] == s).unwrap()[3].parse().unwrap()
    };
    for s in ["160000", "320000", "640000"] {
        assert!(heads("2", s) <= heads("3", s) && heads("3", s) <= heads("4", s));
    }
    for q in ["2", "3", "4"] {
        let hs = [heads(q, "160000"), heads(q, "320000"), heads(q, "640000")];
        let spread = hs.iter().cloned().fold(f64::MIN, f64::max) - hs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.5);
    }
}

#[test]
fn verify_runs_all_or_selected_suites() {
    let all = cvfl(&["verify"]);
    assert!(all.status.success());
    let text = String::from_utf8_lossy(&all.stdout);
    for suite in ["knapsack", "matching", "gradients", "clustering"] {
        assert!(text.contains(&format!("PASS {suite}")), "{text}");
    }
    let one = cvfl(&["verify", "gradients"]);
    assert!(one.status.success());
    let text = String::from_utf8_lossy(&one.stdout);
    assert!(text.contains("PASS gradients"));
    assert!(!text.contains("matching"));
    assert!(!cvfl(&["verify", "astrology"]).status.success());
}

#[test]
fn preset_dump_parses_back() {
    let o = cvfl(&["preset", "dump", "parking-lot"]);
    assert!(o.status.success());
    let parsed = ExperimentConfig::from_json(&String::from_utf8_lossy(&o.stdout)).unwrap();
    assert_eq!(parsed, ExperimentConfig::parking_lot());
}
