//! Primary and foreign key checks, centrally over a dataset and across the
//! fragments of a site image.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Dataset, Relation, SiteImage};
use crate::fragmenter::{FragmentGroup, FragmentationPlan};
use crate::schema::{ForeignKey, Schema, Table};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    PkDuplicate,
    FkDangling,
}

/// `key` is the duplicated primary key, or the foreign key values that
/// reference nothing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IntegrityViolation {
    pub kind: ViolationKind,
    pub table: String,
    pub key: Vec<Value>,
    pub detail: String,
}

impl IntegrityViolation {
    /// Identity of the violation without its human-readable detail.
    pub fn identity(&self) -> (ViolationKind, &str, &[Value]) {
        (self.kind, &self.table, &self.key)
    }
}

fn show(values: &[Value]) -> String {
    values.iter().map(Value::to_string).collect::<Vec<_>>().join(", ")
}

fn dangling(table: &str, fk: &ForeignKey, key: Vec<Value>, holder: &str) -> IntegrityViolation {
    IntegrityViolation {
        kind: ViolationKind::FkDangling,
        table: table.to_string(),
        detail: format!(
            "{} ({}) references no row of {} in {holder}",
            fk.columns.join(", "),
            show(&key),
            fk.ref_table
        ),
        key,
    }
}

/// Key checks on a centralized dataset: duplicate primary keys per table and
/// foreign key values with no referenced row. NULL references are skipped.
pub fn check_integrity(schema: &Schema, data: &Dataset) -> Vec<IntegrityViolation> {
    let mut out = Vec::new();
    for table in schema.tables() {
        let Some(rel) = data.relation(table.name()) else { continue };
        if table.has_primary_key() {
            let mut counts: BTreeMap<Vec<Value>, usize> = BTreeMap::new();
            for row in &rel.rows {
                *counts.entry(rel.pick(row, table.primary_key())).or_default() += 1;
            }
            for (key, n) in counts.into_iter().filter(|(_, n)| *n > 1) {
                out.push(IntegrityViolation {
                    kind: ViolationKind::PkDuplicate,
                    table: table.name().to_string(),
                    detail: format!("primary key ({}) appears {n} times", show(&key)),
                    key,
                });
            }
        }
        for fk in table.foreign_keys() {
            let Some(parent) = data.relation(&fk.ref_table) else { continue };
            let targets: BTreeSet<Vec<Value>> =
                parent.rows.iter().map(|r| parent.pick(r, &fk.ref_columns)).collect();
            let missing: BTreeSet<Vec<Value>> = rel
                .rows
                .iter()
                .map(|r| rel.pick(r, &fk.columns))
                .filter(|k| !k.iter().any(Value::is_null) && !targets.contains(k))
                .collect();
            for key in missing {
                out.push(dangling(table.name(), fk, key, "the dataset"));
            }
        }
    }
    out.sort();
    out
}

/// Rows of one column group as stored: every member of a split group, only
/// the primary copy of a replicated group. Each row comes with the fragment
/// holding it.
fn stored_rows<'a>(
    plan: &'a FragmentationPlan,
    image: &'a SiteImage,
    group: &'a FragmentGroup,
) -> Vec<(&'a str, &'a Relation, &'a Vec<Value>)> {
    let members: Vec<&String> = if group.split {
        group.members.iter().collect()
    } else {
        plan.primary_of(group).map(|f| vec![&f.id]).unwrap_or_default()
    };
    members
        .into_iter()
        .filter_map(|id| image.fragment(id).map(|rel| (id.as_str(), rel)))
        .flat_map(|(id, rel)| rel.rows.iter().map(move |r| (id, rel, r)))
        .collect()
}

/// Per-table view of the stored keys: how many global rows each primary key
/// yields once the column groups are joined back together.
struct KeyCensus<'a> {
    table: &'a Table,
    multiplicity: HashMap<Vec<Value>, usize>,
    holders: HashMap<Vec<Value>, BTreeSet<&'a str>>,
}

impl<'a> KeyCensus<'a> {
    fn take(plan: &'a FragmentationPlan, image: &'a SiteImage, table: &'a Table) -> Self {
        let tree = plan.tree(table.name()).expect("fragmented table");
        let mut multiplicity: Option<HashMap<Vec<Value>, usize>> = None;
        let mut holders: HashMap<Vec<Value>, BTreeSet<&str>> = HashMap::new();
        for group in &tree.groups {
            let mut counts: HashMap<Vec<Value>, usize> = HashMap::new();
            for (id, rel, row) in stored_rows(plan, image, group) {
                let key = rel.pick(row, table.primary_key());
                *counts.entry(key.clone()).or_default() += 1;
                holders.entry(key).or_default().insert(id);
            }
            multiplicity = Some(match multiplicity {
                None => counts,
                Some(prev) => {
                    prev.into_iter().filter_map(|(k, n)| counts.get(&k).map(|m| (k, n * m))).collect()
                }
            });
        }
        Self { table, multiplicity: multiplicity.unwrap_or_default(), holders }
    }

    fn present(&self, key: &[Value]) -> bool {
        self.multiplicity.get(key).is_some_and(|n| *n > 0)
    }

    /// Stored rows carrying all of `columns`, restricted to keys that
    /// survive the join.
    fn rows_with<'b>(
        &self,
        plan: &'b FragmentationPlan,
        image: &'b SiteImage,
        columns: &[String],
    ) -> Vec<(&'b str, Vec<Value>)> {
        let tree = plan.tree(self.table.name()).expect("fragmented table");
        let Some(group) = tree.groups.iter().find(|g| columns.iter().all(|c| g.columns.contains(c))) else {
            return Vec::new();
        };
        stored_rows(plan, image, group)
            .into_iter()
            .filter(|(_, rel, row)| self.present(&rel.pick(row, self.table.primary_key())))
            .map(|(id, rel, row)| (id, rel.pick(row, columns)))
            .collect()
    }
}

/// Key checks across the fragments of `image`: a primary key stored more
/// than once within the partitions of a table, and foreign key values whose
/// referenced row exists in no fragment of the parent. Only references
/// between fragmented tables are checked. Output is sorted.
pub fn check_global_integrity(image: &SiteImage, plan: &FragmentationPlan) -> Vec<IntegrityViolation> {
    let censuses: BTreeMap<&str, KeyCensus> = plan
        .fragmented_tables()
        .map(|t| (t, KeyCensus::take(plan, image, plan.schema.table(t).expect("plan table in schema"))))
        .collect();

    let mut out = Vec::new();
    for (name, census) in &censuses {
        for (key, n) in census.multiplicity.iter().filter(|(_, n)| **n > 1) {
            let holders: Vec<&str> = census.holders[key].iter().copied().collect();
            out.push(IntegrityViolation {
                kind: ViolationKind::PkDuplicate,
                table: name.to_string(),
                key: key.clone(),
                detail: format!("primary key ({}) stored {n} times across {}", show(key), holders.join(", ")),
            });
        }
        for fk in census.table.foreign_keys() {
            let Some(parent) = censuses.get(fk.ref_table.as_str()) else { continue };
            let targets: BTreeSet<Vec<Value>> =
                parent.rows_with(plan, image, &fk.ref_columns).into_iter().map(|(_, k)| k).collect();
            let mut missing: BTreeMap<Vec<Value>, BTreeSet<&str>> = BTreeMap::new();
            for (id, values) in census.rows_with(plan, image, &fk.columns) {
                if !values.iter().any(Value::is_null) && !targets.contains(&values) {
                    missing.entry(values).or_default().insert(id);
                }
            }
            for (key, ids) in missing {
                let holder = ids.into_iter().collect::<Vec<_>>().join(", ");
                out.push(dangling(name, fk, key, &holder));
            }
        }
    }
    out.sort();
    out
}
