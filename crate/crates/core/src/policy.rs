//! Declarative distribution policy.
//!
//! A [`PolicyDocument`] is the JSON form a designer writes; resolving it
//! against a [`Schema`] and [`Topology`] yields a [`DistributionPolicy`] in
//! which every table, column and site name is known to exist.

use std::fmt;

use indexmap::IndexMap;
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::diag::Diagnostic;
use crate::ident;
use crate::schema::{Schema, Table};
use crate::topology::Topology;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FragmentationMode {
    None,
    Horizontal,
    Vertical,
    Hybrid,
    ReplicateFull,
}

impl fmt::Display for FragmentationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FragmentationMode::None => "none",
            FragmentationMode::Horizontal => "horizontal",
            FragmentationMode::Vertical => "vertical",
            FragmentationMode::Hybrid => "hybrid",
            FragmentationMode::ReplicateFull => "replicate_full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefreshMode {
    Complete,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefreshPolicy {
    pub mode: RefreshMode,
    #[serde(default = "default_interval")]
    pub interval_days: u32,
}

fn default_interval() -> u32 {
    7
}

impl Default for RefreshPolicy {
    fn default() -> Self {
        Self { mode: RefreshMode::Complete, interval_days: default_interval() }
    }
}

// ---------------------------------------------------------------------------
// Document form

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDocument {
    #[serde(deserialize_with = "unique_entries", serialize_with = "entries_as_map")]
    pub tables: Vec<(String, TablePolicyDoc)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TablePolicyDoc {
    pub mode: FragmentationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizontal: Option<HorizontalDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertical: Option<Vec<VerticalDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replication: Option<ReplicationDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refresh: Option<RefreshPolicy>,
    /// Parent table to follow for derived fragmentation when several
    /// foreign keys lead to fragmented tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derive_from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizontalDoc {
    pub column: String,
    #[serde(deserialize_with = "unique_entries", serialize_with = "entries_as_map")]
    pub assignments: Vec<(String, Vec<Json>)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_site: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_domain: Option<Vec<Json>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerticalDoc {
    pub fragment_name: String,
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sites: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary_site: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shared_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationDoc {
    pub sites: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary_site: Option<String>,
}

/// Deserialize a JSON object into ordered entries, rejecting repeated keys
/// (serde's map types would silently keep the last one).
fn unique_entries<'de, D, V>(de: D) -> Result<Vec<(String, V)>, D::Error>
where
    D: Deserializer<'de>,
    V: Deserialize<'de>,
{
    struct Entries<V>(std::marker::PhantomData<V>);

    impl<'de, V: Deserialize<'de>> Visitor<'de> for Entries<V> {
        type Value = Vec<(String, V)>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a JSON object")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
            let mut out: Vec<(String, V)> = Vec::new();
            while let Some((key, value)) = map.next_entry::<String, V>()? {
                if out.iter().any(|(k, _)| *k == key) {
                    return Err(serde::de::Error::custom(format!("duplicate key `{key}`")));
                }
                out.push((key, value));
            }
            Ok(out)
        }
    }

    de.deserialize_map(Entries(std::marker::PhantomData))
}

fn entries_as_map<S, V>(entries: &[(String, V)], ser: S) -> Result<S::Ok, S::Error>
where
    S: serde::Serializer,
    V: Serialize,
{
    use serde::ser::SerializeMap;
    let mut map = ser.serialize_map(Some(entries.len()))?;
    for (k, v) in entries {
        map.serialize_entry(k, v)?;
    }
    map.end()
}

impl PolicyDocument {
    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        serde_json::from_str(text).map_err(|e| PolicyError::Document(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy document serializes")
    }
}

// ---------------------------------------------------------------------------
// Resolved form

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizontalSpec {
    pub column: String,
    /// Site logical name to the values that site receives, in topology order.
    pub assignments: Vec<(String, Vec<Value>)>,
    pub default_site: Option<String>,
    pub declared_domain: Option<Vec<Value>>,
}

impl HorizontalSpec {
    /// Sites receiving a horizontal fragment, in topology order: every
    /// assigned site plus the default site when it is not already assigned.
    pub fn fragment_sites(&self, topology: &Topology) -> Vec<String> {
        let mut sites: Vec<String> = self.assignments.iter().map(|(s, _)| s.clone()).collect();
        if let Some(d) = &self.default_site {
            if !sites.contains(d) {
                sites.push(d.clone());
            }
        }
        sites.sort_by_key(|s| topology.position(s).unwrap_or(usize::MAX));
        sites
    }

    pub fn values_for(&self, site: &str) -> &[Value] {
        self.assignments.iter().find(|(s, _)| s == site).map(|(_, v)| v.as_slice()).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerticalFragmentSpec {
    pub fragment_name: String,
    /// Columns in table order; always includes the primary key.
    pub columns: Vec<String>,
    pub sites: Vec<String>,
    pub primary_site: String,
    pub shared_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationSpec {
    pub sites: Vec<String>,
    pub primary_site: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TablePolicy {
    pub table: String,
    pub mode: FragmentationMode,
    pub horizontal: Option<HorizontalSpec>,
    pub vertical: Option<Vec<VerticalFragmentSpec>>,
    pub replication: Option<ReplicationSpec>,
    pub refresh: RefreshPolicy,
    /// True when `refresh` was filled in from the default rather than declared.
    pub refresh_defaulted: bool,
    pub derive_from: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionPolicy {
    policies: IndexMap<String, TablePolicy>,
}

impl DistributionPolicy {
    pub fn get(&self, table: &str) -> Option<&TablePolicy> {
        self.policies.get(table)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TablePolicy> {
        self.policies.values()
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    /// Insert or replace the policy for one table, keeping the position of
    /// an existing entry.
    pub fn upsert(&mut self, policy: TablePolicy) {
        self.policies.insert(policy.table.clone(), policy);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("malformed policy document: {0}")]
    Document(String),
    #[error("policy names unknown table {0}")]
    UnknownTable(String),
    #[error("table {0} has more than one policy")]
    DuplicateTablePolicy(String),
    #[error("table {table} has no column {column}")]
    UnknownColumn { table: String, column: String },
    #[error("policy for {table} names unknown site {site}")]
    UnknownSite { table: String, site: String },
    #[error("policy for {table}: {reason}")]
    ModeMismatch { table: String, reason: String },
    #[error("table {table} declares vertical fragment {fragment} twice")]
    DuplicateFragment { table: String, fragment: String },
    #[error("policy for {table}, column {column}: {reason}")]
    BadValue { table: String, column: String, reason: String },
}

impl PolicyError {
    pub fn code(&self) -> &'static str {
        match self {
            PolicyError::Document(_) => "malformed-document",
            PolicyError::UnknownTable(_) => "unknown-table",
            PolicyError::DuplicateTablePolicy(_) => "duplicate-table-policy",
            PolicyError::UnknownColumn { .. } => "unknown-column",
            PolicyError::UnknownSite { .. } => "unknown-site",
            PolicyError::ModeMismatch { .. } => "mode-mismatch",
            PolicyError::DuplicateFragment { .. } => "duplicate-fragment",
            PolicyError::BadValue { .. } => "bad-value",
        }
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        let subject = match self {
            PolicyError::Document(_) => "policy".to_string(),
            PolicyError::UnknownTable(t) | PolicyError::DuplicateTablePolicy(t) => t.clone(),
            PolicyError::UnknownColumn { table, .. }
            | PolicyError::UnknownSite { table, .. }
            | PolicyError::ModeMismatch { table, .. }
            | PolicyError::DuplicateFragment { table, .. }
            | PolicyError::BadValue { table, .. } => table.clone(),
        };
        Diagnostic::error(self.code(), subject, self.to_string())
    }
}

/// Parse and resolve a JSON policy document.
pub fn parse_policy(
    text: &str,
    schema: &Schema,
    topology: &Topology,
) -> Result<DistributionPolicy, PolicyError> {
    resolve_policy(&PolicyDocument::from_json(text)?, schema, topology)
}

pub fn resolve_policy(
    doc: &PolicyDocument,
    schema: &Schema,
    topology: &Topology,
) -> Result<DistributionPolicy, PolicyError> {
    let mut policies = IndexMap::new();
    for (raw_name, table_doc) in &doc.tables {
        let policy = resolve_table_policy(raw_name, table_doc, schema, topology)?;
        if policies.contains_key(&policy.table) {
            return Err(PolicyError::DuplicateTablePolicy(policy.table));
        }
        policies.insert(policy.table.clone(), policy);
    }
    Ok(DistributionPolicy { policies })
}

/// Resolve the policy of a single table.
pub fn resolve_table_policy(
    raw_table: &str,
    doc: &TablePolicyDoc,
    schema: &Schema,
    topology: &Topology,
) -> Result<TablePolicy, PolicyError> {
    let name = ident::normalize(raw_table);
    let table = schema.table(&name).ok_or_else(|| PolicyError::UnknownTable(name.clone()))?;
    let r = Resolver { table, topology };

    let mismatch =
        |reason: &str| PolicyError::ModeMismatch { table: name.clone(), reason: reason.to_string() };
    use FragmentationMode as M;
    let wants_h = matches!(doc.mode, M::Horizontal | M::Hybrid);
    let wants_v = matches!(doc.mode, M::Vertical | M::Hybrid);
    match (wants_h, doc.horizontal.is_some()) {
        (true, false) => return Err(mismatch(&format!("mode {} requires a horizontal section", doc.mode))),
        (false, true) => {
            return Err(mismatch(&format!("mode {} does not take a horizontal section", doc.mode)))
        }
        _ => {}
    }
    match (wants_v, doc.vertical.is_some()) {
        (true, false) => return Err(mismatch(&format!("mode {} requires a vertical section", doc.mode))),
        (false, true) => {
            return Err(mismatch(&format!("mode {} does not take a vertical section", doc.mode)))
        }
        _ => {}
    }
    if doc.replication.is_some() && doc.mode != M::ReplicateFull {
        return Err(mismatch(&format!("mode {} does not take a replication section", doc.mode)));
    }
    if doc.derive_from.is_some() && doc.mode != M::None {
        return Err(mismatch("derive_from only applies to tables with mode none"));
    }
    if let Some(refresh) = &doc.refresh {
        if refresh.interval_days == 0 {
            return Err(mismatch("refresh interval_days must be at least 1"));
        }
    }

    let horizontal = doc.horizontal.as_ref().map(|h| r.horizontal(h)).transpose()?;
    let vertical = doc.vertical.as_ref().map(|frags| r.vertical(frags, horizontal.as_ref())).transpose()?;
    let replication = match doc.mode {
        M::ReplicateFull => Some(r.replication(doc.replication.as_ref())?),
        _ => None,
    };
    let derive_from = match &doc.derive_from {
        Some(raw) => {
            let parent = ident::normalize(raw);
            if !table.foreign_keys().iter().any(|fk| fk.ref_table == parent) {
                return Err(mismatch(&format!(
                    "derive_from names {parent}, which no foreign key references"
                )));
            }
            Some(parent)
        }
        None => None,
    };

    Ok(TablePolicy {
        table: name,
        mode: doc.mode,
        horizontal,
        vertical,
        replication,
        refresh: doc.refresh.unwrap_or_default(),
        refresh_defaulted: doc.refresh.is_none(),
        derive_from,
    })
}

struct Resolver<'a> {
    table: &'a Table,
    topology: &'a Topology,
}

impl Resolver<'_> {
    fn name(&self) -> String {
        self.table.name().to_string()
    }

    fn column(&self, raw: &str) -> Result<String, PolicyError> {
        let col = ident::normalize(raw);
        if self.table.column(&col).is_some() {
            Ok(col)
        } else {
            Err(PolicyError::UnknownColumn { table: self.name(), column: col })
        }
    }

    fn site(&self, raw: &str) -> Result<String, PolicyError> {
        match self.topology.site(raw) {
            Some(s) => Ok(s.logical_name.clone()),
            None => Err(PolicyError::UnknownSite { table: self.name(), site: raw.to_string() }),
        }
    }

    fn sites(&self, raw: &[String]) -> Result<Vec<String>, PolicyError> {
        let mut out = Vec::new();
        for s in raw {
            let site = self.site(s)?;
            if out.contains(&site) {
                return Err(PolicyError::ModeMismatch {
                    table: self.name(),
                    reason: format!("site {site} listed twice"),
                });
            }
            out.push(site);
        }
        self.sort_sites(&mut out);
        Ok(out)
    }

    fn sort_sites(&self, sites: &mut [String]) {
        sites.sort_by_key(|s| self.topology.position(s).unwrap_or(usize::MAX));
    }

    fn values(&self, column: &str, raw: &[Json], what: &str) -> Result<Vec<Value>, PolicyError> {
        let ctype = self.table.column(column).expect("resolved column").ctype;
        let bad =
            |reason: String| PolicyError::BadValue { table: self.name(), column: column.to_string(), reason };
        let mut out: Vec<Value> = Vec::new();
        for json in raw {
            let v = Value::from_json(json, &ctype).map_err(|e| bad(format!("{what}: {e}")))?;
            if v.is_null() {
                return Err(bad(format!("{what}: NULL cannot be listed")));
            }
            if out.contains(&v) {
                return Err(bad(format!("{what}: value {v} listed twice")));
            }
            out.push(v);
        }
        Ok(out)
    }

    fn horizontal(&self, doc: &HorizontalDoc) -> Result<HorizontalSpec, PolicyError> {
        let column = self.column(&doc.column)?;
        if doc.assignments.is_empty() {
            return Err(PolicyError::ModeMismatch {
                table: self.name(),
                reason: "horizontal section assigns no values".into(),
            });
        }
        let mut assignments = Vec::new();
        for (raw_site, raw_values) in &doc.assignments {
            let site = self.site(raw_site)?;
            if raw_values.is_empty() {
                return Err(PolicyError::BadValue {
                    table: self.name(),
                    column,
                    reason: format!("site {site} is assigned an empty value list"),
                });
            }
            if assignments.iter().any(|(s, _)| *s == site) {
                return Err(PolicyError::ModeMismatch {
                    table: self.name(),
                    reason: format!("site {site} is assigned twice"),
                });
            }
            let values = self.values(&column, raw_values, &format!("assignment for {site}"))?;
            assignments.push((site, values));
        }
        assignments.sort_by_key(|(s, _)| self.topology.position(s).unwrap_or(usize::MAX));
        let default_site = doc.default_site.as_deref().map(|s| self.site(s)).transpose()?;
        let declared_domain =
            doc.declared_domain.as_ref().map(|d| self.values(&column, d, "declared_domain")).transpose()?;
        Ok(HorizontalSpec { column, assignments, default_site, declared_domain })
    }

    fn vertical(
        &self,
        docs: &[VerticalDoc],
        horizontal: Option<&HorizontalSpec>,
    ) -> Result<Vec<VerticalFragmentSpec>, PolicyError> {
        if docs.is_empty() {
            return Err(PolicyError::ModeMismatch {
                table: self.name(),
                reason: "vertical section declares no fragments".into(),
            });
        }
        let mut out: Vec<VerticalFragmentSpec> = Vec::new();
        for doc in docs {
            let fragment_name = ident::normalize(&doc.fragment_name);
            if fragment_name.is_empty() {
                return Err(PolicyError::ModeMismatch {
                    table: self.name(),
                    reason: "vertical fragment name is empty".into(),
                });
            }
            if out.iter().any(|f| f.fragment_name == fragment_name) {
                return Err(PolicyError::DuplicateFragment { table: self.name(), fragment: fragment_name });
            }
            let mut listed = Vec::new();
            for raw in &doc.columns {
                let col = self.column(raw)?;
                if listed.contains(&col) {
                    return Err(PolicyError::ModeMismatch {
                        table: self.name(),
                        reason: format!("fragment {fragment_name} lists column {col} twice"),
                    });
                }
                listed.push(col);
            }
            let columns: Vec<String> = self
                .table
                .columns()
                .iter()
                .map(|c| c.name.clone())
                .filter(|c| self.table.is_key_column(c) || listed.contains(c))
                .collect();

            let mut shared = Vec::new();
            for raw in &doc.shared_columns {
                let col = self.column(raw)?;
                if !columns.contains(&col) || self.table.is_key_column(&col) {
                    return Err(PolicyError::ModeMismatch {
                        table: self.name(),
                        reason: format!(
                            "shared column {col} must be a non-key column of fragment {fragment_name}"
                        ),
                    });
                }
                shared.push(col);
            }
            shared.sort_by_key(|c| self.table.column_index(c));
            shared.dedup();

            let split = horizontal.filter(|h| columns.contains(&h.column));
            let (sites, primary_site) = match split {
                Some(h) => {
                    let expected = h.fragment_sites(self.topology);
                    if !doc.sites.is_empty() && self.sites(&doc.sites)? != expected {
                        return Err(PolicyError::ModeMismatch {
                            table: self.name(),
                            reason: format!(
                                "fragment {fragment_name} holds the horizontal column, so its sites follow the \
                                 horizontal assignments ({})",
                                expected.join(", ")
                            ),
                        });
                    }
                    let primary = match &doc.primary_site {
                        Some(p) => self.site(p)?,
                        None => expected[0].clone(),
                    };
                    if !expected.contains(&primary) {
                        return Err(PolicyError::ModeMismatch {
                            table: self.name(),
                            reason: format!(
                                "primary site {primary} of {fragment_name} is not one of its sites"
                            ),
                        });
                    }
                    (expected, primary)
                }
                None => {
                    if doc.sites.is_empty() {
                        return Err(PolicyError::ModeMismatch {
                            table: self.name(),
                            reason: format!("vertical fragment {fragment_name} names no host site"),
                        });
                    }
                    let sites = self.sites(&doc.sites)?;
                    let primary = match &doc.primary_site {
                        Some(p) => self.site(p)?,
                        None => self.site(&doc.sites[0])?,
                    };
                    if !sites.contains(&primary) {
                        return Err(PolicyError::ModeMismatch {
                            table: self.name(),
                            reason: format!(
                                "primary site {primary} of {fragment_name} is not one of its sites"
                            ),
                        });
                    }
                    (sites, primary)
                }
            };
            out.push(VerticalFragmentSpec {
                fragment_name,
                columns,
                sites,
                primary_site,
                shared_columns: shared,
            });
        }
        Ok(out)
    }

    fn replication(&self, doc: Option<&ReplicationDoc>) -> Result<ReplicationSpec, PolicyError> {
        let Some(doc) = doc else {
            let sites: Vec<String> = self.topology.sites().iter().map(|s| s.logical_name.clone()).collect();
            let primary_site = sites.first().cloned().ok_or_else(|| PolicyError::ModeMismatch {
                table: self.name(),
                reason: "replication needs at least one site".into(),
            })?;
            return Ok(ReplicationSpec { sites, primary_site });
        };
        if doc.sites.is_empty() {
            return Err(PolicyError::ModeMismatch {
                table: self.name(),
                reason: "replication section lists no sites".into(),
            });
        }
        let sites = self.sites(&doc.sites)?;
        let primary_site = match &doc.primary_site {
            Some(p) => self.site(p)?,
            None => self.site(&doc.sites[0])?,
        };
        if !sites.contains(&primary_site) {
            return Err(PolicyError::ModeMismatch {
                table: self.name(),
                reason: format!("primary site {primary_site} is not one of the replica sites"),
            });
        }
        Ok(ReplicationSpec { sites, primary_site })
    }
}

/// Render a resolved policy back into its document form.
pub fn render_policy(policy: &DistributionPolicy) -> PolicyDocument {
    let tables = policy.iter().map(|p| (ident::document(&p.table), render_table_policy(p))).collect();
    PolicyDocument { tables }
}

pub fn render_table_policy(p: &TablePolicy) -> TablePolicyDoc {
    let values = |vs: &[Value]| vs.iter().map(Value::to_json).collect::<Vec<_>>();
    TablePolicyDoc {
        mode: p.mode,
        horizontal: p.horizontal.as_ref().map(|h| HorizontalDoc {
            column: ident::document(&h.column),
            assignments: h.assignments.iter().map(|(s, v)| (s.clone(), values(v))).collect(),
            default_site: h.default_site.clone(),
            declared_domain: h.declared_domain.as_deref().map(values),
        }),
        vertical: p.vertical.as_ref().map(|frags| {
            frags
                .iter()
                .map(|f| VerticalDoc {
                    fragment_name: ident::document(&f.fragment_name),
                    columns: f.columns.iter().map(|c| ident::document(c)).collect(),
                    sites: f.sites.clone(),
                    primary_site: Some(f.primary_site.clone()),
                    shared_columns: f.shared_columns.iter().map(|c| ident::document(c)).collect(),
                })
                .collect()
        }),
        replication: p
            .replication
            .as_ref()
            .map(|r| ReplicationDoc { sites: r.sites.clone(), primary_site: Some(r.primary_site.clone()) }),
        refresh: (!p.refresh_defaulted).then_some(p.refresh),
        derive_from: p.derive_from.as_deref().map(ident::document),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::parse_ddl;
    use crate::topology::Site;

    fn schema() -> Schema {
        parse_ddl(
            "CREATE TABLE EMPLOYEE (SSN NUMBER, EMP_FNAME VARCHAR2(100), ASSIGNMENT VARCHAR2(10) NOT NULL,
               CONSTRAINT PK_EMPLOYEE PRIMARY KEY (SSN));
             CREATE TABLE STUDENT (NCE NUMBER, ST_FNAME VARCHAR2(200), ST_LNAME VARCHAR2(200),
               INSTITUTION VARCHAR2(10) NOT NULL, NB_BORROW NUMBER, CONSTRAINT PK11 PRIMARY KEY (NCE));",
        )
        .unwrap()
    }

    fn topology() -> Topology {
        Topology::new(
            ["ENIT", "FST", "FSEGT"]
                .iter()
                .map(|s| Site::new(s, "127.0.0.1", &format!("{s}_DBLINK"), "ROOT", "root"))
                .collect(),
        )
    }

    const HYBRID: &str = r#"{"tables": {
        "STUDENT": {
            "mode": "hybrid",
            "horizontal": {
                "column": "INSTITUTION",
                "assignments": {"ENIT": ["ENIT"], "FST": ["FST"], "FSEGT": ["FSEGT"]},
                "declared_domain": ["ENIT", "FST", "FSEGT"]
            },
            "vertical": [
                {"fragment_name": "STUDENT", "columns": ["ST_FNAME", "ST_LNAME", "INSTITUTION"]},
                {"fragment_name": "STUDENT_LIB", "columns": ["NB_BORROW", "ST_FNAME", "ST_LNAME"],
                 "sites": ["ENIT", "FST", "FSEGT"], "primary_site": "ENIT",
                 "shared_columns": ["ST_FNAME", "ST_LNAME"]}
            ]
        }
    }}"#;

    #[test]
    fn resolves_hybrid_student() {
        let p = parse_policy(HYBRID, &schema(), &topology()).unwrap();
        let s = p.get("STUDENT").unwrap();
        assert_eq!(s.mode, FragmentationMode::Hybrid);
        let h = s.horizontal.as_ref().unwrap();
        assert_eq!(h.assignments.len(), 3);
        assert_eq!(h.values_for("FST"), [Value::text("FST")]);
        let v = s.vertical.as_ref().unwrap();
        assert_eq!(v[1].columns, ["NCE", "ST_FNAME", "ST_LNAME", "NB_BORROW"]);
        assert_eq!(v[0].sites, ["ENIT", "FST", "FSEGT"]);
        assert_eq!(s.refresh, RefreshPolicy { mode: RefreshMode::Complete, interval_days: 7 });
        assert!(s.refresh_defaulted);
    }

    #[test]
    fn employee_one_value_per_site() {
        let doc = r#"{"tables":{"employee":{"mode":"horizontal","horizontal":{"column":"assignment",
            "assignments":{"FSEGT":["FSEGT"],"ENIT":["ENIT"],"FST":["FST"]}}}}}"#;
        let p = parse_policy(doc, &schema(), &topology()).unwrap();
        let h = p.get("EMPLOYEE").unwrap().horizontal.as_ref().unwrap();
        let sites: Vec<_> = h.assignments.iter().map(|(s, _)| s.as_str()).collect();
        assert_eq!(sites, ["ENIT", "FST", "FSEGT"]);
    }

    #[test]
    fn unknown_names() {
        let t = topology();
        let s = schema();
        assert_eq!(
            parse_policy(r#"{"tables":{"XYZ":{"mode":"none"}}}"#, &s, &t),
            Err(PolicyError::UnknownTable("XYZ".into()))
        );
        let e = parse_policy(
            r#"{"tables":{"EMPLOYEE":{"mode":"horizontal","horizontal":{"column":"NOPE","assignments":{"ENIT":["A"]}}}}}"#,
            &s,
            &t,
        );
        assert!(matches!(e, Err(PolicyError::UnknownColumn { .. })));
        let e = parse_policy(
            r#"{"tables":{"EMPLOYEE":{"mode":"horizontal","horizontal":{"column":"ASSIGNMENT","assignments":{"MARS":["A"]}}}}}"#,
            &s,
            &t,
        );
        assert!(matches!(e, Err(PolicyError::UnknownSite { .. })));
    }

    #[test]
    fn mode_spec_mismatch() {
        let e = parse_policy(r#"{"tables":{"EMPLOYEE":{"mode":"horizontal"}}}"#, &schema(), &topology());
        assert!(matches!(e, Err(PolicyError::ModeMismatch { .. })));
        let e = parse_policy(
            r#"{"tables":{"EMPLOYEE":{"mode":"none","vertical":[{"fragment_name":"A","columns":[],"sites":["ENIT"]}]}}}"#,
            &schema(),
            &topology(),
        );
        assert!(matches!(e, Err(PolicyError::ModeMismatch { .. })));
    }

    #[test]
    fn duplicate_fragment_and_table() {
        let doc = r#"{"tables":{"EMPLOYEE":{"mode":"vertical","vertical":[
            {"fragment_name":"A","columns":["EMP_FNAME"],"sites":["ENIT"]},
            {"fragment_name":"a","columns":["ASSIGNMENT"],"sites":["FST"]}]}}}"#;
        assert!(matches!(
            parse_policy(doc, &schema(), &topology()),
            Err(PolicyError::DuplicateFragment { .. })
        ));
        let doc = r#"{"tables":{"EMPLOYEE":{"mode":"none"},"employee":{"mode":"none"}}}"#;
        assert_eq!(
            parse_policy(doc, &schema(), &topology()),
            Err(PolicyError::DuplicateTablePolicy("EMPLOYEE".into()))
        );
        let doc = r#"{"tables":{"EMPLOYEE":{"mode":"none"},"EMPLOYEE":{"mode":"none"}}}"#;
        assert!(matches!(parse_policy(doc, &schema(), &topology()), Err(PolicyError::Document(_))));
    }

    #[test]
    fn unknown_fields_rejected() {
        let doc = r#"{"tables":{"EMPLOYEE":{"mode":"none","moed":"x"}}}"#;
        assert!(matches!(parse_policy(doc, &schema(), &topology()), Err(PolicyError::Document(_))));
    }

    #[test]
    fn typed_values() {
        let doc = r#"{"tables":{"EMPLOYEE":{"mode":"horizontal","horizontal":{"column":"ASSIGNMENT",
            "assignments":{"ENIT":[1]}}}}}"#;
        assert!(matches!(parse_policy(doc, &schema(), &topology()), Err(PolicyError::BadValue { .. })));
        let doc = r#"{"tables":{"EMPLOYEE":{"mode":"horizontal","horizontal":{"column":"ASSIGNMENT",
            "assignments":{"ENIT":["A","A"]}}}}}"#;
        assert!(matches!(parse_policy(doc, &schema(), &topology()), Err(PolicyError::BadValue { .. })));
    }

    #[test]
    fn render_round_trips() {
        let p = parse_policy(HYBRID, &schema(), &topology()).unwrap();
        let again = resolve_policy(&render_policy(&p), &schema(), &topology()).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn hybrid_split_fragment_sites_must_follow_assignments() {
        let doc = HYBRID.replace(
            r#"{"fragment_name": "STUDENT", "columns""#,
            r#"{"fragment_name": "STUDENT", "sites": ["ENIT"], "columns""#,
        );
        assert!(matches!(parse_policy(&doc, &schema(), &topology()), Err(PolicyError::ModeMismatch { .. })));
    }
}
