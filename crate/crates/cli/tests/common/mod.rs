//! Golden corpus shared by the golden-file and acceptance suites.

#![allow(dead_code)]

use std::path::PathBuf;

use causal_cli::run_cli;

pub fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub struct Case {
    pub name: &'static str,
    pub args: Vec<String>,
}

fn case(name: &'static str, args: &[&str]) -> Case {
    let args = args
        .iter()
        .map(|a| match a.strip_prefix('@') {
            Some(file) => data(file),
            None => a.to_string(),
        })
        .collect();
    Case { name, args }
}

/// Every successful invocation in the corpus. `@file` names a data file.
pub fn corpus() -> Vec<Case> {
    vec![
        case("measure_worked_example", &["measure", "@worked_example.json"]),
        case("measure_zero_cell_small", &["measure", "@zero_cell_small.json"]),
        case("measure_stratified_simpson", &["measure", "@stratified_simpson.json"]),
        case("measure_case_control", &["measure", "@case_control.json"]),
        case("meta_heterogeneous", &["meta", "@heterogeneous_meta.json"]),
        case("dose_heterogeneous", &["dose", "@heterogeneous_meta.json"]),
        case("checklist_heterogeneous", &["checklist", "@heterogeneous_meta.json"]),
        case("checklist_worked_example_strict", &["checklist", "@worked_example.json", "--config", "@lcl_config.json"]),
        case("legal_worked_example", &["legal", "@worked_example.json"]),
        case("legal_case_control_lcl", &["legal", "@case_control.json", "--config", "@lcl_config.json"]),
        case("apportion_excess_units", &["apportion", "--rr-a", "6", "--rr-s", "11", "--rr-as", "51", "--scheme", "paper"]),
        case(
            "apportion_synergy",
            &["apportion", "--rr-a", "6", "--rr-s", "11", "--rr-as", "51", "--scheme", "synergy"],
        ),
        case("taxi_bare_statistics", &["taxi", "--spec", "@three_blue_one_yellow.json"]),
        case("taxi_unequal", &["taxi", "--spec", "@taxi_unequal.json"]),
        case("sensitivity_worked_example", &["sensitivity", "@worked_example.json", "--seed", "11", "--draws", "5000"]),
        case("simulate_plain", &["simulate", "--truth", "@truth_plain.json"]),
        case("simulate_plain_seed_override", &["simulate", "--truth", "@truth_plain.json", "--seed", "99"]),
        case("simulate_confounded_expected", &["simulate", "--truth", "@truth_confounded.json"]),
    ]
}

pub struct Run {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

pub fn run(args: &[String], extra: &[&str]) -> Run {
    let argv: Vec<String> = std::iter::once("causal".to_string())
        .chain(args.iter().cloned())
        .chain(extra.iter().map(|s| s.to_string()))
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_cli(argv, &mut out, &mut err);
    Run { code, stdout: out, stderr: String::from_utf8(err).expect("stderr is UTF-8") }
}

pub fn run_strs(args: &[&str]) -> Run {
    run(&args.iter().map(|s| s.to_string()).collect::<Vec<_>>(), &[])
}
