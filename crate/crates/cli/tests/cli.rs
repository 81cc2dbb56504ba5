use std::path::PathBuf;
use std::process::Command as Process;

use clap::Parser;
use ddbforge_cli::{run, CliConfig, Command, Format, Outcome, EXIT_INPUT, EXIT_INVALID, EXIT_IO, EXIT_OK};
use serde_json::Value;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn config(command: Command, policy: &str) -> CliConfig {
    let mut c = CliConfig::parse_from(["ddbforge", "validate", "--no-color"]);
    c.command = command;
    c.schema = Some(fixture("library/schema.sql"));
    c.topology = Some(fixture("library/topology.json"));
    c.policy = Some(fixture(policy));
    c
}

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/library").join(name);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn generate_writes_three_scripts_matching_the_goldens() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Command::Generate, "library/policy.json");
    c.out = Some(dir.path().to_path_buf());
    let o = run(&c);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert!(o.stderr.contains("warning: generating despite"), "{}", o.stderr);
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["ENIT_DDB_SCRIPT.sql", "FSEGT_DDB_SCRIPT.sql", "FST_DDB_SCRIPT.sql", "manifest.json"]);
    for name in names {
        assert_eq!(std::fs::read_to_string(dir.path().join(&name)).unwrap(), golden(&name), "{name}");
    }
}

#[test]
fn overlapping_lists_exit_one_with_a_disjointness_error() {
    let o = run(&config(Command::Validate, "negative/overlap_policy.json"));
    assert_eq!(o.code, EXIT_INVALID);
    assert!(o.stdout.contains("EMPLOYEE  disjointness    error"), "{}", o.stdout);

    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Command::Generate, "negative/overlap_policy.json");
    c.out = Some(dir.path().join("out"));
    let o = run(&c);
    assert_eq!(o.code, EXIT_INVALID);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn ddl_typo_exits_two_with_its_position() {
    let mut c = config(Command::Validate, "library/policy.json");
    c.schema = Some(fixture("negative/typo_schema.sql"));
    let o = run(&c);
    assert_eq!(o.code, EXIT_INPUT);
    assert!(o.stderr.contains("11:31"), "{}", o.stderr);
    assert!(o.stderr.contains("NUL"), "{}", o.stderr);
}

#[test]
fn missing_file_exits_three() {
    let mut c = config(Command::Validate, "library/policy.json");
    c.policy = Some(fixture("library/nope.json"));
    assert_eq!(run(&c).code, EXIT_IO);
}

#[test]
fn missing_arguments_exit_two() {
    assert_eq!(run(&config(Command::Generate, "library/policy.json")).code, EXIT_INPUT);
    assert_eq!(run(&config(Command::Simulate, "library/policy.json")).code, EXIT_INPUT);
    let mut c = config(Command::Validate, "library/policy.json");
    c.topology = None;
    assert_eq!(run(&c).code, EXIT_INPUT);
    let mut c = config(Command::Simulate, "library/policy.json");
    c.seed = Some(1);
    c.data = Some(fixture("library/sample.json"));
    assert_eq!(run(&c).code, EXIT_INPUT);
}

#[test]
fn ambiguous_derivation_exits_two_naming_the_parents() {
    let o = run(&config(Command::Validate, "negative/ambiguous_policy.json"));
    assert_eq!(o.code, EXIT_INPUT);
    assert!(o.stderr.contains("BOOKS, STUDENT"), "{}", o.stderr);
}

/// Text and JSON reports list the same (table, criterion, level) triples.
#[test]
fn text_and_json_reports_agree() {
    for policy in ["library/policy.json", "negative/overlap_policy.json", "negative/open_domain_policy.json"]
    {
        let text = run(&config(Command::Validate, policy));
        let mut c = config(Command::Validate, policy);
        c.format = Format::Json;
        let json = run(&c);
        assert_eq!(text.code, json.code);
        let doc: Value = serde_json::from_str(&json.stdout).unwrap();
        let from_json: Vec<String> = doc["verdicts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| {
                format!(
                    "{} {} {}",
                    v["table"].as_str().unwrap(),
                    v["criterion"].as_str().unwrap(),
                    v["level"].as_str().unwrap()
                )
            })
            .collect();
        let from_text: Vec<String> = text
            .stdout
            .lines()
            .filter(|l| !l.starts_with(' ') && !l.starts_with("overall"))
            .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
            .collect();
        assert_eq!(from_json, from_text, "{policy}");
        let overall = text.stdout.lines().last().unwrap().trim_start_matches("overall: ").to_string();
        assert_eq!(doc["overall"], Value::String(overall));
    }
}

#[test]
fn open_domain_is_indeterminate_but_not_fatal() {
    let o = run(&config(Command::Validate, "negative/open_domain_policy.json"));
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.contains("completeness    indeterminate"), "{}", o.stdout);
}

#[test]
fn plan_prints_the_canonical_document() {
    let o = run(&config(Command::Plan, "library/policy.json"));
    assert_eq!(o.code, EXIT_OK);
    let plan = ddbforge_core::fragmenter::FragmentationPlan::from_json(&o.stdout).unwrap();
    assert_eq!(plan.to_json() + "\n", o.stdout);
    assert_eq!(plan.fragments.len(), 18);
}

#[test]
fn redact_hides_link_secrets() {
    let mut c = config(Command::Plan, "library/policy.json");
    c.redact = true;
    let o = run(&c);
    assert!(!o.stdout.contains("\"secret\": \"root\""));
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Command::Generate, "library/policy.json");
    c.redact = true;
    c.out = Some(dir.path().to_path_buf());
    assert_eq!(run(&c).code, EXIT_OK);
    let script = std::fs::read_to_string(dir.path().join("FST_DDB_SCRIPT.sql")).unwrap();
    assert!(script.contains("IDENTIFIED BY VALUES '<redacted>'"));
    assert!(!script.contains("VALUES 'root'"));
}

#[test]
fn simulate_from_seed_and_from_file() {
    let mut c = config(Command::Simulate, "library/policy.json");
    c.seed = Some(3);
    let o = run(&c);
    assert_eq!(o.code, EXIT_OK, "{}", o.stdout);
    assert!(o.stdout.ends_with("simulation passed\n"));

    let mut c = config(Command::Simulate, "library/policy.json");
    c.data = Some(fixture("library/sample.json"));
    c.format = Format::Json;
    let o = run(&c);
    let doc: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(doc["passed"], true);

    let mut c = config(Command::Simulate, "negative/overlap_policy.json");
    c.seed = Some(3);
    assert_eq!(run(&c).code, EXIT_INVALID);
}

#[test]
fn color_only_when_allowed() {
    let mut c = config(Command::Validate, "library/policy.json");
    c.no_color = false;
    assert!(run(&c).stdout.contains("\x1b["));
    c.no_color = true;
    assert!(!run(&c).stdout.contains("\x1b["));
}

fn binary(args: &[&str], envs: &[(&str, &str)]) -> Outcome {
    let out =
        Process::new(env!("CARGO_BIN_EXE_ddbforge")).args(args).envs(envs.iter().copied()).output().unwrap();
    Outcome {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

#[test]
fn binary_maps_outcomes_to_exit_codes() {
    let schema = fixture("library/schema.sql");
    let topology = fixture("library/topology.json");
    let overlap = fixture("negative/overlap_policy.json");
    let args = |policy: &PathBuf| {
        vec![
            "validate".to_string(),
            "--schema".into(),
            schema.display().to_string(),
            "--topology".into(),
            topology.display().to_string(),
            "--policy".into(),
            policy.display().to_string(),
        ]
    };
    let a = args(&overlap);
    let o = binary(&a.iter().map(String::as_str).collect::<Vec<_>>(), &[("DDBFORGE_NO_COLOR", "1")]);
    assert_eq!(o.code, 1);
    assert!(o.stdout.contains("disjointness    error"));
    assert!(!o.stdout.contains("\x1b["));

    assert_eq!(binary(&["frobnicate"], &[]).code, 2);
    assert_eq!(binary(&["--help"], &[]).code, 0);
}
