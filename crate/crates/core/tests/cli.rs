use std::process::{Command, Output};

use rmnp_core::harness::csv_io;

fn rmnp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmnp")).args(args).output().expect("binary runs")
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = rmnp(&["train", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--bogus"));
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    assert_eq!(rmnp(&[]).status.code(), Some(2));
}

#[test]
fn bad_config_value_exits_2() {
    let out = rmnp(&["train", "--beta", "1.5", "--steps", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn malformed_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "steps = \"many\"\n").unwrap();
    let out = rmnp(&["train", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes_and_reports_every_suite() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("verify.csv");
    let out = rmnp(&["verify", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("all 9 suites passed"));
    let mut reader = csv::Reader::from_path(csv).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["suite", "passed", "cases", "worst"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().any(|r| &r[0] == "RN (inf,2) lemma"));
    assert!(rows.iter().all(|r| &r[1] == "true"));
}

#[test]
fn train_writes_parseable_csv_to_stdout() {
    let out = rmnp(&["train", "--problem", "logreg", "--optimizer", "adamw", "--steps", "12", "--log-every", "4"]);
    assert!(out.status.success());
    let (rows, dominance) = csv_io::read_train_csv(&out.stdout[..]).unwrap();
    assert!(!dominance);
    assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![4, 8, 12]);
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "problem = \"mlp\"\nwidths = [4, 6, 2]\nsteps = 50\nlog_every = 10\n").unwrap();
    let csv = dir.path().join("out.csv");
    let out = rmnp(&["train", "--config", cfg.to_str().unwrap(), "--steps", "20", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let (rows, _) = csv_io::read_train_csv(std::fs::File::open(csv).unwrap()).unwrap();
    assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![10, 20]);
}

#[test]
fn dominance_on_a_problem_without_matrices_exits_2() {
    let out = rmnp(&["train", "--problem", "logreg", "--dominance", "--steps", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rate_check_emits_one_row_per_horizon() {
    let out = rmnp(&["rate-check", "--horizons", "100,200", "--sigma", "0.5"]);
    assert!(out.status.success());
    let points = csv_io::read_rate_csv(&out.stdout[..]).unwrap();
    assert_eq!(points.iter().map(|p| p.total_steps).collect::<Vec<_>>(), vec![100, 200]);
}

#[test]
fn repeated_train_runs_are_byte_identical() {
    let args = ["train", "--problem", "quadratic", "--sigma", "1", "--steps", "30", "--seed", "9"];
    assert_eq!(rmnp(&args).stdout, rmnp(&args).stdout);
    let other = ["train", "--problem", "quadratic", "--sigma", "1", "--steps", "30", "--seed", "10"];
    assert_ne!(rmnp(&args).stdout, rmnp(&other).stdout);
}

#[test]
fn bench_compare_emits_both_kinds() {
    let out = rmnp(&["bench", "--compare", "--m", "24", "--n", "96", "--repeats", "2"]);
    assert!(out.status.success());
    let rows = csv_io::read_bench_csv(&out.stdout[..]).unwrap();
    assert_eq!(rows.iter().map(|r| r.kind.as_str()).collect::<Vec<_>>(), vec!["rn", "ns5"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ns5/rn time ratio at 24x96"));
}

#[test]
fn inf2_rate_check_reports_the_estimate() {
    let out = rmnp(&["rate-check", "--geometry", "inf2", "--horizons", "100,400", "--pairs", "16"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sampled estimate over 16 pairs"));
    assert_eq!(csv_io::read_rate_csv(&out.stdout[..]).unwrap().len(), 2);
}
