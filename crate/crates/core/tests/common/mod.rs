#![allow(dead_code)]

use std::path::PathBuf;

use ddbforge_core::fragmenter::{plan_with_derivation, FragmentationPlan};
use ddbforge_core::policy::{parse_policy, DistributionPolicy};
use ddbforge_core::schema::{parse_ddl, Schema};
use ddbforge_core::simulator::Dataset;
use ddbforge_core::topology::Topology;

pub mod oracle;
pub mod plsql;

pub fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture_path(rel)).unwrap_or_else(|e| panic!("reading fixture {rel}: {e}"))
}

pub fn library_inputs() -> (Schema, Topology) {
    let schema = parse_ddl(&fixture("library/schema.sql")).expect("fixture schema parses");
    let topology = Topology::from_json(&fixture("library/topology.json")).expect("fixture topology parses");
    (schema, topology)
}

pub fn policy_from(rel: &str) -> DistributionPolicy {
    let (schema, topology) = library_inputs();
    parse_policy(&fixture(rel), &schema, &topology).expect("fixture policy resolves")
}

pub fn library_policy() -> DistributionPolicy {
    policy_from("library/policy.json")
}

pub fn library_plan() -> FragmentationPlan {
    let (schema, topology) = library_inputs();
    plan_with_derivation(&schema, &topology, &library_policy()).expect("fixture plan builds")
}

pub fn library_sample() -> Dataset {
    let (schema, _) = library_inputs();
    Dataset::from_json(&fixture("library/sample.json"), &schema).expect("fixture sample loads")
}
