use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mildhjb::hjb::ValueIterate;
use mildhjb_cli::output::{
    read_gamma_csv, read_ou_csv, GAMMA_CSV, OU_CSV, REPORT_TXT, SOLUTION_CSV,
};
use mildhjb_cli::pipeline::{diagnose_to_dir, run_to_dir};
use mildhjb_cli::{ScenarioConfig, Tag};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn mildhjb(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mildhjb"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report_value(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in report"))
        .to_string()
}

fn ratios(report: &str) -> Vec<f64> {
    report
        .lines()
        .skip_while(|l| *l != "[iterations]")
        .skip(2)
        .take_while(|l| !l.is_empty())
        .filter_map(|l| l.rsplit(',').next().filter(|r| !r.is_empty()))
        .map(|r| r.parse().unwrap())
        .collect()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn zero_hamiltonian_needs_one_correction() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mildhjb(
        &["run"],
        &configs().join("zero_hamiltonian.toml"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = fs::read_to_string(tmp.path().join(REPORT_TXT)).unwrap();
    assert_eq!(report_value(&report, "status"), "converged");
    assert_eq!(report_value(&report, "iterations"), "1");
    assert!(tmp.path().join(SOLUTION_CSV).exists());
    assert!(tmp.path().join(OU_CSV).exists());
}

#[test]
fn lp_example_contracts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mildhjb(
        &["run", "--quiet"],
        &configs().join("lp_example.toml"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let report = fs::read_to_string(tmp.path().join(REPORT_TXT)).unwrap();
    assert_eq!(report_value(&report, "converged"), "true");
    let r = ratios(&report);
    assert!(!r.is_empty());
    assert!(r.iter().all(|&x| x <= 0.85), "{r:?}");
    let max: f64 = report_value(&report, "max_contraction_ratio")
        .parse()
        .unwrap();
    assert!(max <= 0.85);
    let emb: f64 = report_value(&report, "embedding_norm_max").parse().unwrap();
    assert!(emb <= 1.0 + 1e-8);
}

#[test]
fn missing_lattice_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[coefficients]\nfile = \"absent.csv\"\n");
    let o = mildhjb(&["run"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).starts_with("error[CONFIG_MISSING_FILE]:"),
        "{}",
        stderr(&o)
    );
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn missing_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mildhjb(&["diagnose"], &tmp.path().join("nope.toml"), tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[CONFIG_MISSING_FILE]:"));
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[solver]\ntolerance = 1e-3\n");
    let o = mildhjb(&["run"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error[CONFIG_PARSE]:"), "{err}");
    assert_eq!(err.lines().count(), 1);
    assert!(ScenarioConfig::parse("seeds = 1").is_err());
}

#[test]
fn invalid_values_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[discretization]\nmodes = 0\n");
    let o = mildhjb(&["run"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).starts_with("error[CONFIG_INVALID]:"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn coarse_grid_refuses_the_exponent_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[discretization]\nmodes = 2\ncells = 2\n");
    for verb in ["run", "diagnose"] {
        let o = mildhjb(&[verb], &cfg, &tmp.path().join("out"));
        assert_eq!(o.status.code(), Some(2), "{verb}");
        assert!(stderr(&o).starts_with("error[FIT_SPAN]:"), "{}", stderr(&o));
    }
    assert_eq!(Tag::FitSpan.exit_code(), 2);
}

#[test]
fn constant_coefficients_pass_every_probe() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mildhjb(
        &["diagnose"],
        &configs().join("heat_diagnose.toml"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().all(|l| !l.ends_with(" fail")), "{stdout}");
    let summary = fs::read_to_string(tmp.path().join("diagnose_summary.txt")).unwrap();
    assert_eq!(report_value(&summary, "status"), "pass");
    // the quarter row is informational: flagged, but the verb still succeeds
    let gamma = read_gamma_csv(&tmp.path().join(GAMMA_CSV)).unwrap();
    let quarter = gamma.iter().find(|g| g.sigma == 0.25).unwrap();
    assert!(!quarter.converged);
    assert!(gamma.iter().find(|g| g.sigma == 0.5).unwrap().converged);
    assert!(summary.contains("gamma_series_sigma_0.25,"));
}

#[test]
fn lattice_coefficients_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mildhjb(&["run"], &configs().join("lattice_file.toml"), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn seed_flag_is_echoed_in_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mildhjb(
        &["run", "--seed", "42"],
        &configs().join("zero_hamiltonian.toml"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let report = fs::read_to_string(tmp.path().join(REPORT_TXT)).unwrap();
    assert!(
        report.contains("\n[resolved_config]\nseed = 42\n"),
        "{report}"
    );
}

const SMALL_RUN: &str = "seed = 3\n\n[discretization]\nmodes = 2\ncells = 16\n";

#[test]
fn run_outputs_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::parse(SMALL_RUN).unwrap();
    let outcome = run_to_dir(&cfg, tmp.path()).unwrap();
    let iterate = outcome.iterate.as_ref().unwrap();
    let text = fs::read(tmp.path().join(SOLUTION_CSV)).unwrap();
    let back = ValueIterate::read_csv(text.as_slice(), outcome.alpha).unwrap();
    assert_eq!(&back, iterate);
    assert_eq!(
        read_ou_csv(&tmp.path().join(OU_CSV)).unwrap(),
        outcome.ou_rows
    );
    let report = fs::read_to_string(tmp.path().join(REPORT_TXT)).unwrap();
    let resolved = report.split("[resolved_config]\n").nth(1).unwrap();
    assert_eq!(ScenarioConfig::parse(resolved).unwrap(), outcome.config);
}

#[test]
fn diagnose_outputs_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::parse(SMALL_RUN).unwrap();
    let outcome = diagnose_to_dir(&cfg, tmp.path()).unwrap();
    assert_eq!(
        read_ou_csv(&tmp.path().join(OU_CSV)).unwrap(),
        outcome.ou_rows
    );
    assert_eq!(
        read_gamma_csv(&tmp.path().join(GAMMA_CSV)).unwrap(),
        outcome.gamma
    );
}
