//! Single-row insert routing, mirroring the generated before-insert trigger.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{project, split_targets, unroutable_reason, SiteImage};
use crate::fragmenter::FragmentationPlan;
use crate::value::Value;

/// One projected row landing in one fragment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub site: String,
    pub fragment: String,
    pub row: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    DuplicatePk,
    Unroutable,
    FkViolation,
    /// The row does not fit the table: unknown table, wrong arity, NULL in a
    /// NOT NULL column.
    Malformed,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::DuplicatePk => "duplicate-pk",
            RejectReason::Unroutable => "unroutable",
            RejectReason::FkViolation => "fk-violation",
            RejectReason::Malformed => "malformed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub reason: RejectReason,
    pub message: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.reason, self.message)
    }
}

impl std::error::Error for Rejection {}

fn reject(reason: RejectReason, message: impl Into<String>) -> Rejection {
    Rejection { reason, message: message.into() }
}

fn show(values: &[Value]) -> String {
    values.iter().map(Value::to_string).collect::<Vec<_>>().join(", ")
}

/// Decide where an insert of `row` into `table` goes, given the current
/// contents of `image`.
///
/// Checks run in the order the generated triggers fire: foreign keys into
/// fragmented parents (NULL references are not checked), then global primary
/// key uniqueness over every fragment of the table, then the horizontal or
/// derived branch.
/// An accepted row yields one placement per fragment it lands in, replicas
/// included, in plan order.
pub fn route_insert(
    plan: &FragmentationPlan,
    image: &SiteImage,
    table: &str,
    row: &[Value],
) -> Result<Vec<Placement>, Rejection> {
    let tree = plan
        .tree(table)
        .ok_or_else(|| reject(RejectReason::Malformed, format!("{table} has no fragments")))?;
    let schema_table = plan.schema.table(table).expect("plan table in schema");
    if row.len() != schema_table.columns().len() {
        return Err(reject(
            RejectReason::Malformed,
            format!("{table} takes {} values, got {}", schema_table.columns().len(), row.len()),
        ));
    }
    if let Some(col) = schema_table.columns().iter().zip(row).find(|(c, v)| !c.nullable && v.is_null()) {
        return Err(reject(RejectReason::Malformed, format!("column {} of {table} is NOT NULL", col.0.name)));
    }

    for fk in schema_table.foreign_keys() {
        if fk.ref_table == table || !plan.is_fragmented(&fk.ref_table) {
            continue;
        }
        let values = project(schema_table, row, &fk.columns);
        if values.iter().any(Value::is_null) {
            continue;
        }
        let found = plan
            .fragments_of(&fk.ref_table)
            .filter(|f| fk.ref_columns.iter().all(|c| f.columns.contains(c)))
            .any(|f| {
                image.fragment(&f.id).is_some_and(|rel| {
                    rel.rows
                        .iter()
                        .any(|r| rel.pick(r, &fk.ref_columns).iter().zip(&values).all(|(a, b)| a.sql_eq(b)))
                })
            });
        if !found {
            return Err(reject(
                RejectReason::FkViolation,
                format!("{} ({}) not found in {}", fk.columns.join(", "), show(&values), fk.ref_table),
            ));
        }
    }

    let key = project(schema_table, row, schema_table.primary_key());
    let taken = plan.fragments_of(table).any(|f| {
        image
            .fragment(&f.id)
            .is_some_and(|rel| rel.rows.iter().any(|r| rel.pick(r, schema_table.primary_key()) == key))
    });
    if taken {
        return Err(reject(RejectReason::DuplicatePk, format!("{table} already holds key ({})", show(&key))));
    }

    let mut placements = Vec::new();
    for group in &tree.groups {
        let targets = if group.split {
            let t = split_targets(plan, image, tree, group, schema_table, row);
            if t.is_empty() {
                return Err(reject(
                    RejectReason::Unroutable,
                    unroutable_reason(plan, tree, schema_table, row),
                ));
            }
            t
        } else {
            group.members.iter().filter_map(|id| plan.fragment(id)).collect()
        };
        for f in targets {
            placements.push(Placement {
                site: f.site.clone(),
                fragment: f.id.clone(),
                row: project(schema_table, row, &f.columns),
            });
        }
    }
    Ok(placements)
}

/// Write accepted placements into `image`.
pub fn apply_insert(image: &mut SiteImage, placements: &[Placement]) {
    for p in placements {
        if let Some(rel) = image.fragment_mut(&p.fragment) {
            rel.rows.push(p.row.clone());
        }
    }
}
