mod common;

use common::oracle::{exhaustive_cases, random_cases};
use common::{library_inputs, library_plan, library_sample, policy_from};
use ddbforge_core::fragmenter::{plan, plan_with_derivation, FragmentationPlan};
use ddbforge_core::policy::parse_policy;
use ddbforge_core::validator::{
    check_fragment_pk, validate, validate_with_sample, Criterion, Level, Overall, ValidationReport,
};

fn report_for(policy_fixture: &str) -> ValidationReport {
    let (schema, topology) = library_inputs();
    let p = plan_with_derivation(&schema, &topology, &policy_from(policy_fixture)).unwrap();
    validate(&p, &schema)
}

fn level(report: &ValidationReport, table: &str, c: Criterion) -> Level {
    report.verdict(table, c).unwrap().level
}

#[test]
fn library_fixture_reports_shared_columns_as_warning() {
    let report = report_for("library/policy.json");
    assert_eq!(level(&report, "STUDENT", Criterion::Reconstruction), Level::Pass);
    assert_eq!(level(&report, "STUDENT", Criterion::Completeness), Level::Pass);
    let d = report.verdict("STUDENT", Criterion::Disjointness).unwrap();
    assert_eq!(d.level, Level::Warning);
    assert!(d.messages.iter().any(|m| m.contains("ST_FNAME")));
    assert!(d.messages.iter().any(|m| m.contains("ST_LNAME")));
    for t in ["EMPLOYEE", "BOOKS", "AUTHORS", "LOANS"] {
        for c in [
            Criterion::Reconstruction,
            Criterion::Completeness,
            Criterion::Disjointness,
            Criterion::Structural,
        ] {
            assert_eq!(level(&report, t, c), Level::Pass, "{t} {c}");
        }
    }
    assert_eq!(report.overall, Overall::ValidWithWarnings);
}

#[test]
fn verdicts_follow_display_order() {
    let report = report_for("library/policy.json");
    let tables = ["EMPLOYEE", "STUDENT", "BOOKS", "AUTHORS", "LOANS"];
    let mut expected = Vec::new();
    for t in tables {
        for c in [Criterion::Reconstruction, Criterion::Completeness, Criterion::Disjointness] {
            expected.push((t.to_string(), c));
        }
    }
    for t in tables {
        expected.push((t.to_string(), Criterion::Structural));
    }
    let got: Vec<_> = report.verdicts.iter().map(|v| (v.table.clone(), v.criterion)).collect();
    assert_eq!(got, expected);
}

#[test]
fn overlapping_lists_are_a_disjointness_error() {
    let report = report_for("negative/overlap_policy.json");
    let d = report.verdict("EMPLOYEE", Criterion::Disjointness).unwrap();
    assert_eq!(d.level, Level::Error);
    assert!(d.messages[0].contains("'ENIT'"));
    assert_eq!(report.overall, Overall::Invalid);
}

#[test]
fn open_domain_is_indeterminate() {
    let report = report_for("negative/open_domain_policy.json");
    assert_eq!(level(&report, "STUDENT", Criterion::Completeness), Level::Indeterminate);
    assert_eq!(report.overall, Overall::ValidWithWarnings);
}

#[test]
fn warning_and_error_verdicts_explain_themselves() {
    for fixture in ["library/policy.json", "negative/overlap_policy.json", "negative/open_domain_policy.json"]
    {
        for v in report_for(fixture).verdicts {
            if v.level != Level::Pass {
                assert!(!v.messages.is_empty(), "{fixture}: {v:?}");
            }
        }
    }
}

fn drop_key(plan: &mut FragmentationPlan, fragment: &str) {
    let f = plan.fragments.iter_mut().find(|f| f.id == fragment).unwrap();
    f.columns.retain(|c| c != "NCE");
}

#[test]
fn fragment_without_primary_key_is_a_structural_error() {
    let (schema, _) = library_inputs();
    let mut p = library_plan();
    assert_eq!(check_fragment_pk(p.fragment("STUDENT_LIB_ENIT").unwrap(), &schema), None);
    drop_key(&mut p, "STUDENT_LIB_FST");
    assert!(check_fragment_pk(p.fragment("STUDENT_LIB_FST").unwrap(), &schema).unwrap().contains("NCE"));
    let report = validate(&p, &schema);
    assert_eq!(level(&report, "STUDENT", Criterion::Structural), Level::Error);
    assert_eq!(level(&report, "STUDENT", Criterion::Reconstruction), Level::Error);
    assert_eq!(report.overall, Overall::Invalid);
}

#[test]
fn full_replicas_carry_the_key() {
    let (schema, topology) = library_inputs();
    let policy =
        parse_policy(r#"{"tables":{"BOOKS":{"mode":"replicate_full"}}}"#, &schema, &topology).unwrap();
    let p = plan(&schema, &topology, &policy).unwrap();
    assert!(p.fragments.iter().all(|f| check_fragment_pk(f, &schema).is_none()));
    assert_eq!(validate(&p, &schema).overall, Overall::Valid);
}

#[test]
fn undeclared_vertical_duplicates_are_errors() {
    let (schema, topology) = library_inputs();
    let doc = r#"{"tables":{"BOOKS":{"mode":"vertical","vertical":[
        {"fragment_name":"B_MAIN","columns":["TITLE","EDITOR","YEAR","AREA","WEBSITE"],"sites":["ENIT"]},
        {"fragment_name":"B_STOCK","columns":["STOCK","TITLE"],"sites":["FST"]}]}}}"#;
    let policy = parse_policy(doc, &schema, &topology).unwrap();
    let report = validate(&plan(&schema, &topology, &policy).unwrap(), &schema);
    let d = report.verdict("BOOKS", Criterion::Disjointness).unwrap();
    assert_eq!(d.level, Level::Error);
    assert!(d.messages[0].contains("TITLE"));
    assert_eq!(level(&report, "BOOKS", Criterion::Completeness), Level::Pass);

    let doc = doc.replace(r#""STOCK","TITLE""#, r#""TITLE""#);
    let policy = parse_policy(&doc, &schema, &topology).unwrap();
    let report = validate(&plan(&schema, &topology, &policy).unwrap(), &schema);
    assert_eq!(level(&report, "BOOKS", Criterion::Completeness), Level::Error);
}

#[test]
fn vertical_oracle_counts_columns() {
    let (schema, _) = library_inputs();
    let p = library_plan();
    let tree = p.tree("STUDENT").unwrap();
    let table = schema.table("STUDENT").unwrap();
    for col in table.columns() {
        let holders = tree.groups.iter().filter(|g| g.columns.contains(&col.name)).count();
        let shared = tree.groups.iter().any(|g| g.shared_columns.contains(&col.name));
        assert!(holders >= 1);
        if !table.is_key_column(&col.name) && !shared {
            assert_eq!(holders, 1, "{}", col.name);
        }
    }
}

#[test]
fn empty_plan_is_valid() {
    let (schema, topology) = library_inputs();
    let policy = parse_policy(r#"{"tables":{}}"#, &schema, &topology).unwrap();
    let report = validate(&plan(&schema, &topology, &policy).unwrap(), &schema);
    assert!(report.verdicts.is_empty());
    assert_eq!(report.overall, Overall::Valid);
}

#[test]
fn rendering_is_deterministic_and_formats_agree() {
    let a = report_for("library/policy.json");
    let b = report_for("library/policy.json");
    assert_eq!(a.render_text(), b.render_text());
    assert_eq!(a.to_json(), b.to_json());
    let parsed: ValidationReport = serde_json::from_str(&a.to_json()).unwrap();
    assert_eq!(parsed, a);
    let text = a.render_text();
    for v in &a.verdicts {
        assert!(text.lines().any(|l| l.starts_with(&v.table)
            && l.contains(&v.criterion.to_string())
            && l.ends_with(&v.level.to_string())));
    }
}

#[test]
fn sample_round_trip_keeps_fixture_verdicts() {
    let (schema, _) = library_inputs();
    let p = library_plan();
    assert_eq!(validate_with_sample(&p, &schema, &library_sample()), validate(&p, &schema));
}

#[test]
fn sample_with_unplaceable_row_fails_reconstruction() {
    let (schema, topology) = library_inputs();
    let p =
        plan_with_derivation(&schema, &topology, &policy_from("negative/open_domain_policy.json")).unwrap();
    let mut text = common::fixture("library/sample.json");
    text = text.replace(r#""Tunis", "ENIT", 2, 1]"#, r#""Tunis", "X", 2, 1]"#);
    let sample = ddbforge_core::simulator::Dataset::from_json(&text, &schema).unwrap();
    let report = validate_with_sample(&p, &schema, &sample);
    assert_eq!(level(&report, "STUDENT", Criterion::Reconstruction), Level::Error);
}

#[test]
fn horizontal_verdicts_match_enumeration_exhaustively() {
    let cases = exhaustive_cases(2);
    assert!(cases.len() >= 500);
    for case in cases {
        assert!(case.agrees(), "{case:?}");
    }
}

#[test]
fn horizontal_verdicts_match_enumeration_on_random_domains() {
    for case in random_cases(7, 300) {
        assert!(case.agrees(), "{case:?}");
    }
}
