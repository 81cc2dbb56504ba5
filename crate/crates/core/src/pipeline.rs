//! Text inputs to a checked plan, with every failure turned into
//! diagnostics. Shared by the command line and the HTTP service.

use thiserror::Error;

use crate::diag::{has_errors, Diagnostic};
use crate::fragmenter::{plan_with_derivation, FragmentationPlan, PlanError};
use crate::policy::{parse_policy, DistributionPolicy, PolicyError};
use crate::schema::{check_schema, parse_ddl, ParseError, Schema};
use crate::topology::{validate_topology, Topology};

#[derive(Debug, Clone, Error)]
pub enum InputError {
    #[error("schema: {0}")]
    SchemaSyntax(ParseError),
    #[error("schema: {}", render(.0))]
    Schema(Vec<Diagnostic>),
    #[error("topology: {0}")]
    TopologySyntax(String),
    #[error("topology: {}", render(.0))]
    Topology(Vec<Diagnostic>),
    #[error("policy: {0}")]
    Policy(PolicyError),
    #[error("plan: {0}")]
    Plan(PlanError),
}

fn render(diags: &[Diagnostic]) -> String {
    diags.iter().filter(|d| d.is_error()).map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

impl InputError {
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            InputError::SchemaSyntax(e) => vec![Diagnostic::error("parse-error", "schema", e.to_string())],
            InputError::Schema(d) | InputError::Topology(d) => d.clone(),
            InputError::TopologySyntax(m) => {
                vec![Diagnostic::error("malformed-document", "topology", m.clone())]
            }
            InputError::Policy(e) => vec![e.to_diagnostic()],
            InputError::Plan(e) => vec![e.to_diagnostic()],
        }
    }
}

/// Parse DDL and run the schema checks. Warnings come back with the schema.
pub fn load_schema(ddl: &str) -> Result<(Schema, Vec<Diagnostic>), InputError> {
    let schema = parse_ddl(ddl).map_err(InputError::SchemaSyntax)?;
    let diags = check_schema(&schema);
    if has_errors(&diags) {
        return Err(InputError::Schema(diags));
    }
    Ok((schema, diags))
}

pub fn load_topology(json: &str) -> Result<(Topology, Vec<Diagnostic>), InputError> {
    let topology = Topology::from_json(json).map_err(|e| InputError::TopologySyntax(e.to_string()))?;
    check_topology(topology)
}

pub fn check_topology(topology: Topology) -> Result<(Topology, Vec<Diagnostic>), InputError> {
    let diags = validate_topology(&topology);
    if has_errors(&diags) {
        return Err(InputError::Topology(diags));
    }
    Ok((topology, diags))
}

pub fn load_policy(
    json: &str,
    schema: &Schema,
    topology: &Topology,
) -> Result<DistributionPolicy, InputError> {
    parse_policy(json, schema, topology).map_err(InputError::Policy)
}

pub fn build_plan(
    schema: &Schema,
    topology: &Topology,
    policy: &DistributionPolicy,
) -> Result<FragmentationPlan, InputError> {
    plan_with_derivation(schema, topology, policy).map_err(InputError::Plan)
}

/// All three documents to a plan.
pub fn compile(ddl: &str, topology_json: &str, policy_json: &str) -> Result<FragmentationPlan, InputError> {
    let (schema, _) = load_schema(ddl)?;
    let (topology, _) = load_topology(topology_json)?;
    let policy = load_policy(policy_json, &schema, &topology)?;
    build_plan(&schema, &topology, &policy)
}
