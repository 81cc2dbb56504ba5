//! In-memory execution of a fragmentation plan: distribute rows to
//! fragments, route single inserts the way the generated trigger does,
//! check integrity across sites and rebuild the global relations.
//!
//! Relations are multisets; order of rows is never significant.

mod generate;
mod integrity;
mod report;
mod routing;

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::fragmenter::{Fragment, FragmentGroup, FragmentationPlan, Layout, PredicateKind, TableTree};
use crate::ident;
use crate::schema::{Schema, Table};
use crate::value::{Value, ValueError};

pub use generate::{generate_dataset, GenerateError};
pub use integrity::{check_global_integrity, check_integrity, IntegrityViolation, ViolationKind};
pub use report::{simulate, FragmentCount, SimulationReport, TableRoundTrip};
pub use routing::{apply_insert, route_insert, Placement, RejectReason, Rejection};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Relation {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn sorted_rows(&self) -> Vec<Vec<Value>> {
        let mut rows = self.rows.clone();
        rows.sort();
        rows
    }

    /// Same columns and the same rows with the same multiplicities.
    pub fn multiset_eq(&self, other: &Relation) -> bool {
        self.columns == other.columns
            && self.len() == other.len()
            && self.sorted_rows() == other.sorted_rows()
    }

    /// Values of `columns` in `row`, in the order given.
    pub(crate) fn pick(&self, row: &[Value], columns: &[String]) -> Vec<Value> {
        columns.iter().map(|c| row[self.column_index(c).expect("column of relation")].clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("sample data is not valid JSON: {0}")]
    Json(String),
    #[error("sample data must be an object mapping table names to arrays of rows")]
    Shape,
    #[error("sample data names unknown table {0}")]
    UnknownTable(String),
    #[error("{table} row {row}: expected an array of {expected} values")]
    Arity { table: String, row: usize, expected: usize },
    #[error("{table} row {row}, column {column}: {source}")]
    Value { table: String, row: usize, column: String, source: ValueError },
    #[error("{table} row {row}: column {column} is NOT NULL")]
    NotNull { table: String, row: usize, column: String },
    #[error("{table} row {row}: primary key ({}) already used", .key.iter().map(Value::to_string).collect::<Vec<_>>().join(", "))]
    DuplicateKey { table: String, row: usize, key: Vec<Value> },
}

/// One relation per schema table, columns in table order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    relations: IndexMap<String, Relation>,
}

impl Dataset {
    pub fn empty(schema: &Schema) -> Self {
        let relations = schema
            .tables()
            .map(|t| {
                (t.name().to_string(), Relation::new(t.columns().iter().map(|c| c.name.clone()).collect()))
            })
            .collect();
        Self { relations }
    }

    /// Read a JSON object `{"TABLE": [[v1, v2, ...], ...]}`. Tables left out
    /// are empty. Primary key uniqueness and NOT NULL are enforced here;
    /// foreign keys are checked separately by [`check_integrity`].
    pub fn from_json(text: &str, schema: &Schema) -> Result<Self, DataError> {
        let json: Json = serde_json::from_str(text).map_err(|e| DataError::Json(e.to_string()))?;
        Self::from_json_value(&json, schema)
    }

    pub fn from_json_value(json: &Json, schema: &Schema) -> Result<Self, DataError> {
        let Json::Object(map) = json else { return Err(DataError::Shape) };
        let mut out = Self::empty(schema);
        for (raw_name, rows) in map {
            let name = ident::normalize(raw_name);
            let table = schema.table(&name).ok_or_else(|| DataError::UnknownTable(name.clone()))?;
            let Json::Array(rows) = rows else { return Err(DataError::Shape) };
            for (i, row) in rows.iter().enumerate() {
                let row = read_row(table, i, row)?;
                out.insert(table, row).map_err(|key| DataError::DuplicateKey {
                    table: name.clone(),
                    row: i,
                    key,
                })?;
            }
        }
        Ok(out)
    }

    pub fn to_json_value(&self) -> Json {
        let map = self
            .relations
            .iter()
            .map(|(name, rel)| {
                let rows = rel.rows.iter().map(|r| Json::Array(r.iter().map(Value::to_json).collect()));
                (ident::document(name), Json::Array(rows.collect()))
            })
            .collect();
        Json::Object(map)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("dataset serializes")
    }

    /// Append a row, refusing a primary key that is already present.
    pub fn insert(&mut self, table: &Table, row: Vec<Value>) -> Result<(), Vec<Value>> {
        let rel = self.relations.get_mut(table.name()).expect("dataset covers the schema");
        if table.has_primary_key() {
            let key: Vec<Value> = table.key_indices().iter().map(|&i| row[i].clone()).collect();
            let clash = rel.rows.iter().any(|r| table.key_indices().iter().map(|&i| &r[i]).eq(key.iter()));
            if clash {
                return Err(key);
            }
        }
        rel.rows.push(row);
        Ok(())
    }

    pub fn relation(&self, table: &str) -> Option<&Relation> {
        self.relations.get(table)
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, &Relation)> {
        self.relations.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn total_rows(&self) -> usize {
        self.relations.values().map(Relation::len).sum()
    }

    pub(crate) fn relation_mut(&mut self, table: &str) -> Option<&mut Relation> {
        self.relations.get_mut(table)
    }
}

fn read_row(table: &Table, index: usize, json: &Json) -> Result<Vec<Value>, DataError> {
    let arity =
        || DataError::Arity { table: table.name().to_string(), row: index, expected: table.columns().len() };
    let Json::Array(cells) = json else { return Err(arity()) };
    if cells.len() != table.columns().len() {
        return Err(arity());
    }
    let mut row = Vec::with_capacity(cells.len());
    for (col, cell) in table.columns().iter().zip(cells) {
        let v = Value::from_json(cell, &col.ctype).map_err(|source| DataError::Value {
            table: table.name().to_string(),
            row: index,
            column: col.name.clone(),
            source,
        })?;
        if v.is_null() && !col.nullable {
            return Err(DataError::NotNull {
                table: table.name().to_string(),
                row: index,
                column: col.name.clone(),
            });
        }
        row.push(v);
    }
    Ok(row)
}

/// Fragment contents per site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteImage {
    pub sites: IndexMap<String, IndexMap<String, Relation>>,
}

impl SiteImage {
    /// Every fragment of the plan, empty, under its site.
    pub fn empty(plan: &FragmentationPlan) -> Self {
        let mut sites: IndexMap<String, IndexMap<String, Relation>> =
            plan.topology.sites().iter().map(|s| (s.logical_name.clone(), IndexMap::new())).collect();
        for f in &plan.fragments {
            sites.entry(f.site.clone()).or_default().insert(f.id.clone(), Relation::new(f.columns.clone()));
        }
        Self { sites }
    }

    pub fn fragment(&self, id: &str) -> Option<&Relation> {
        self.sites.values().find_map(|frags| frags.get(id))
    }

    pub fn fragment_mut(&mut self, id: &str) -> Option<&mut Relation> {
        self.sites.values_mut().find_map(|frags| frags.get_mut(id))
    }

    pub fn total_rows(&self) -> usize {
        self.sites.values().flat_map(|f| f.values()).map(Relation::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("{table}: row ({}) matches no fragment: {reason}", .row.iter().map(Value::to_string).collect::<Vec<_>>().join(", "))]
    Unroutable { table: String, row: Vec<Value>, reason: String },
    #[error("{table}: replicas of {group} diverge ({})", .fragments.join(", "))]
    Divergence { table: String, group: String, fragments: Vec<String> },
    #[error("{table}: fragment {fragment} is missing from the site image")]
    MissingFragment { table: String, fragment: String },
}

impl SimError {
    pub fn table(&self) -> &str {
        match self {
            SimError::Unroutable { table, .. }
            | SimError::Divergence { table, .. }
            | SimError::MissingFragment { table, .. } => table,
        }
    }
}

/// Whether `value` satisfies the predicate of `member` within its split
/// group. Fragments without a predicate accept everything.
pub(crate) fn predicate_accepts(
    plan: &FragmentationPlan,
    group: &FragmentGroup,
    member: &Fragment,
    value: &Value,
) -> bool {
    let Some(pred) = &member.predicate else { return true };
    match pred.kind {
        PredicateKind::InList => pred.values.iter().any(|v| v.sql_eq(value)),
        PredicateKind::CatchAll => !group
            .members
            .iter()
            .filter_map(|id| plan.fragment(id))
            .filter_map(|f| f.predicate.as_ref())
            .filter(|p| p.kind == PredicateKind::InList)
            .any(|p| p.values.iter().any(|v| v.sql_eq(value))),
    }
}

/// Members of a split group that receive `row` of `table`. For derived
/// groups this looks up the referenced parent key in the co-located parent
/// fragment of `image`.
pub(crate) fn split_targets<'a>(
    plan: &'a FragmentationPlan,
    image: &SiteImage,
    tree: &TableTree,
    group: &'a FragmentGroup,
    table: &Table,
    row: &[Value],
) -> Vec<&'a Fragment> {
    let members = group.members.iter().filter_map(|id| plan.fragment(id));
    if tree.layout == Layout::Derived {
        let edge = &plan.derived_edges[&tree.table];
        let key: Vec<&Value> = edge
            .foreign_key
            .columns
            .iter()
            .map(|c| &row[table.column_index(c).expect("fk column")])
            .collect();
        if key.iter().any(|v| v.is_null()) {
            return Vec::new();
        }
        members
            .filter(|m| {
                let parent_id = m.parent_fragment.as_deref().expect("derived fragment has a parent");
                image.fragment(parent_id).is_some_and(|parent| {
                    let idx: Vec<usize> = edge
                        .foreign_key
                        .ref_columns
                        .iter()
                        .map(|c| parent.column_index(c).expect("parent fragment holds referenced key"))
                        .collect();
                    parent.rows.iter().any(|r| idx.iter().zip(&key).all(|(&i, k)| r[i].sql_eq(k)))
                })
            })
            .collect()
    } else {
        members
            .filter(|m| match &m.predicate {
                Some(p) => {
                    predicate_accepts(plan, group, m, &row[table.column_index(&p.column).expect("column")])
                }
                None => true,
            })
            .collect()
    }
}

pub(crate) fn project(table: &Table, row: &[Value], columns: &[String]) -> Vec<Value> {
    columns.iter().map(|c| row[table.column_index(c).expect("fragment column in table")].clone()).collect()
}

/// Place every row of every fragmented table into the fragments whose
/// predicate it satisfies. Replicated groups receive full copies; derived
/// fragments receive the rows whose parent key sits in the co-located parent
/// fragment. Tables without fragments are not distributed.
pub fn distribute(plan: &FragmentationPlan, data: &Dataset) -> Result<SiteImage, SimError> {
    let mut image = SiteImage::empty(plan);
    for (name, tree) in &plan.table_trees {
        let table = plan.schema.table(name).expect("plan table in schema");
        let Some(rel) = data.relation(name) else { continue };
        let mut batches: Vec<(String, Vec<Value>)> = Vec::new();
        for row in &rel.rows {
            for group in &tree.groups {
                let targets: Vec<&Fragment> = if group.split {
                    let t = split_targets(plan, &image, tree, group, table, row);
                    if t.is_empty() {
                        return Err(SimError::Unroutable {
                            table: name.clone(),
                            row: row.clone(),
                            reason: unroutable_reason(plan, tree, table, row),
                        });
                    }
                    t
                } else {
                    group.members.iter().filter_map(|id| plan.fragment(id)).collect()
                };
                for f in targets {
                    batches.push((f.id.clone(), project(table, row, &f.columns)));
                }
            }
        }
        // Derived children look rows up in their parents, so each table's
        // rows land before the next table is processed.
        for (id, row) in batches {
            image.fragment_mut(&id).expect("fragment in image").rows.push(row);
        }
    }
    Ok(image)
}

pub(crate) fn unroutable_reason(
    plan: &FragmentationPlan,
    tree: &TableTree,
    table: &Table,
    row: &[Value],
) -> String {
    match (&tree.horizontal, tree.layout) {
        (_, Layout::Derived) => {
            let edge = &plan.derived_edges[&tree.table];
            let key: Vec<String> = edge
                .foreign_key
                .columns
                .iter()
                .map(|c| row[table.column_index(c).expect("fk column")].to_string())
                .collect();
            format!("no fragment of {} holds key ({})", edge.parent, key.join(", "))
        }
        (Some(h), _) => {
            format!(
                "value {} of {} is assigned to no site",
                row[table.column_index(&h.column).expect("column")],
                h.column
            )
        }
        (None, _) => "no fragment accepts the row".into(),
    }
}

/// Rows of one column group: the union of a split group's members, or the
/// primary copy of a replicated group after checking that every replica
/// holds the same rows.
fn group_rows<'a>(
    plan: &FragmentationPlan,
    image: &'a SiteImage,
    table: &str,
    group: &FragmentGroup,
) -> Result<Vec<&'a Vec<Value>>, SimError> {
    let fetch = |id: &String| {
        image
            .fragment(id)
            .ok_or_else(|| SimError::MissingFragment { table: table.to_string(), fragment: id.clone() })
    };
    if group.split {
        let mut rows = Vec::new();
        for id in &group.members {
            rows.extend(fetch(id)?.rows.iter());
        }
        return Ok(rows);
    }
    let primary = plan.primary_of(group).expect("replicated group has a primary copy");
    let reference = fetch(&primary.id)?;
    let diverging: Vec<String> = group
        .members
        .iter()
        .filter(|id| **id != primary.id)
        .map(|id| fetch(id).map(|r| (id, r)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|(_, r)| !r.multiset_eq(reference))
        .map(|(id, _)| id.clone())
        .collect();
    if !diverging.is_empty() {
        let mut fragments = vec![primary.id.clone()];
        fragments.extend(diverging);
        return Err(SimError::Divergence { table: table.to_string(), group: group.name.clone(), fragments });
    }
    Ok(reference.rows.iter().collect())
}

/// Rebuild every fragmented table: union within each column group, then a
/// join on the primary key across groups. Columns come back in table order.
pub fn reconstruct(image: &SiteImage, plan: &FragmentationPlan) -> Result<Dataset, SimError> {
    let mut out = Dataset::empty(&plan.schema);
    for (name, tree) in &plan.table_trees {
        let table = plan.schema.table(name).expect("plan table in schema");
        let rebuilt = join_groups(plan, image, table, tree)?;
        out.relation_mut(name).expect("dataset covers the schema").rows = rebuilt;
    }
    Ok(out)
}

fn join_groups(
    plan: &FragmentationPlan,
    image: &SiteImage,
    table: &Table,
    tree: &TableTree,
) -> Result<Vec<Vec<Value>>, SimError> {
    let key = table.primary_key();
    let mut groups = Vec::new();
    for g in &tree.groups {
        groups.push((g, group_rows(plan, image, table.name(), g)?));
    }
    let Some(((first, first_rows), rest)) = groups.split_first() else { return Ok(Vec::new()) };

    // For every table column, the first group that stores it.
    let source: Vec<usize> = table
        .columns()
        .iter()
        .map(|c| groups.iter().position(|(g, _)| g.columns.contains(&c.name)).unwrap_or(usize::MAX))
        .collect();
    let key_of = |g: &FragmentGroup, row: &[Value]| -> Vec<Value> {
        key.iter()
            .map(|k| row[g.columns.iter().position(|c| c == k).expect("group holds key")].clone())
            .collect()
    };
    let indexes: Vec<HashMap<Vec<Value>, Vec<&Vec<Value>>>> = rest
        .iter()
        .map(|(g, rows)| {
            let mut idx: HashMap<Vec<Value>, Vec<&Vec<Value>>> = HashMap::new();
            for r in rows {
                idx.entry(key_of(g, r)).or_default().push(r);
            }
            idx
        })
        .collect();

    let mut out = Vec::new();
    for row in first_rows {
        let k = key_of(first, row);
        // Cartesian product over the matching rows of the other groups.
        let mut partials: Vec<Vec<&Vec<Value>>> = vec![vec![*row]];
        for idx in &indexes {
            let matches = idx.get(&k).map(Vec::as_slice).unwrap_or(&[]);
            partials = partials
                .into_iter()
                .flat_map(|p| {
                    matches.iter().map(move |m| {
                        let mut p = p.clone();
                        p.push(m);
                        p
                    })
                })
                .collect();
        }
        for parts in partials {
            let assembled = table
                .columns()
                .iter()
                .zip(&source)
                .map(|(c, &gi)| match groups.get(gi) {
                    Some((g, _)) => parts[gi]
                        [g.columns.iter().position(|gc| *gc == c.name).expect("group column")]
                    .clone(),
                    None => Value::Null,
                })
                .collect();
            out.push(assembled);
        }
    }
    Ok(out)
}
