//! Resolution of schema, topology and policy into a concrete
//! [`FragmentationPlan`].
//!
//! Fragment ids are `TABLE_SITE` for horizontal, derived and fully
//! replicated fragments and `FRAGMENTNAME_SITE` for vertical ones. Output
//! order follows the policy, then the topology's site order.

mod derive;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::Diagnostic;
use crate::policy::{DistributionPolicy, FragmentationMode, HorizontalSpec, RefreshPolicy, TablePolicy};
use crate::schema::{ForeignKey, Schema, Table};
use crate::topology::Topology;
use crate::value::Value;

pub use derive::derive_fragments;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateKind {
    InList,
    /// Everything no sibling fragment's value list accepts.
    CatchAll,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub column: String,
    pub kind: PredicateKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FragmentKind {
    Horizontal,
    Vertical,
    HybridLeaf,
    Derived,
    FullReplica,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub id: String,
    pub table: String,
    pub kind: FragmentKind,
    /// Column group this fragment belongs to (vertical fragment name, or the
    /// table name when the table is not split vertically).
    pub group: String,
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<Predicate>,
    pub site: String,
    pub primary_copy: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_fragment: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Horizontal,
    Vertical,
    Hybrid,
    ReplicateFull,
    Derived,
}

/// A column group of a table and the fragments that store it.
///
/// When `split` is set the members partition the group's rows; otherwise
/// every member holds a full copy and exactly one is the primary copy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentGroup {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shared_columns: Vec<String>,
    pub split: bool,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableTree {
    pub table: String,
    pub layout: Layout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizontal: Option<HorizontalSpec>,
    pub groups: Vec<FragmentGroup>,
    pub refresh: RefreshPolicy,
    pub refresh_defaulted: bool,
}

impl TableTree {
    /// The group whose members partition the table's rows, if any.
    pub fn partition_group(&self) -> Option<&FragmentGroup> {
        self.groups.iter().find(|g| g.split)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedEdge {
    pub foreign_key: ForeignKey,
    pub parent: String,
}

/// Carried from the policy for tables that are not fragmented directly, so
/// derivation can honour a declared parent and refresh settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationHint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub refresh: RefreshPolicy,
    pub refresh_defaulted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentationPlan {
    pub schema: Schema,
    pub topology: Topology,
    pub fragments: Vec<Fragment>,
    pub table_trees: IndexMap<String, TableTree>,
    pub derived_edges: IndexMap<String, DerivedEdge>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub derivation_hints: IndexMap<String, DerivationHint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("table {0} is not in the schema")]
    UnknownTable(String),
    #[error("table {0} has no primary key and cannot be fragmented")]
    NoPrimaryKey(String),
    #[error("table {table} has no column {column}")]
    UnknownColumn { table: String, column: String },
    #[error("table {table} assigns a fragment to unknown site {site}")]
    UnknownSite { table: String, site: String },
    #[error("fragment id {0} collides with a table of the schema")]
    ShadowsTable(String),
    #[error("fragment id {0} is generated twice")]
    DuplicateFragmentId(String),
    #[error("table {table} references several fragmented tables ({}); name one with derive_from", .parents.join(", "))]
    AmbiguousDerivation { table: String, parents: Vec<String> },
    #[error("table {table} asks to derive from {parent}, which is not horizontally fragmented")]
    BadDerivationPreference { table: String, parent: String },
    #[error("foreign key from {table} to {parent} does not reference the full primary key of {parent}")]
    PartialKeyDerivation { table: String, parent: String },
    #[error("derivation edges form a cycle through {}", .0.join(", "))]
    DerivationCycle(Vec<String>),
}

impl PlanError {
    pub fn code(&self) -> &'static str {
        match self {
            PlanError::UnknownTable(_) => "unknown-table",
            PlanError::NoPrimaryKey(_) => "no-primary-key",
            PlanError::UnknownColumn { .. } => "unknown-column",
            PlanError::UnknownSite { .. } => "unknown-site",
            PlanError::ShadowsTable(_) => "fragment-shadows-table",
            PlanError::DuplicateFragmentId(_) => "duplicate-fragment-id",
            PlanError::AmbiguousDerivation { .. } => "ambiguous-derivation",
            PlanError::BadDerivationPreference { .. } => "bad-derivation-preference",
            PlanError::PartialKeyDerivation { .. } => "partial-key-derivation",
            PlanError::DerivationCycle(_) => "derivation-cycle",
        }
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        let subject = match self {
            PlanError::UnknownTable(t) | PlanError::NoPrimaryKey(t) => t.clone(),
            PlanError::UnknownColumn { table, .. }
            | PlanError::UnknownSite { table, .. }
            | PlanError::AmbiguousDerivation { table, .. }
            | PlanError::BadDerivationPreference { table, .. }
            | PlanError::PartialKeyDerivation { table, .. } => table.clone(),
            PlanError::ShadowsTable(id) | PlanError::DuplicateFragmentId(id) => id.clone(),
            PlanError::DerivationCycle(tables) => tables.join(", "),
        };
        Diagnostic::error(self.code(), subject, self.to_string())
    }
}

pub(crate) fn fragment_id(name: &str, site: &str) -> String {
    format!("{name}_{site}").to_uppercase()
}

/// Expand a resolved policy into fragments. Derived fragmentation is a
/// separate step, see [`derive_fragments`].
pub fn plan(
    schema: &Schema,
    topology: &Topology,
    policy: &DistributionPolicy,
) -> Result<FragmentationPlan, PlanError> {
    let mut out = FragmentationPlan {
        schema: schema.clone(),
        topology: topology.clone(),
        fragments: Vec::new(),
        table_trees: IndexMap::new(),
        derived_edges: IndexMap::new(),
        derivation_hints: IndexMap::new(),
    };

    for tp in policy.iter() {
        let table = schema.table(&tp.table).ok_or_else(|| PlanError::UnknownTable(tp.table.clone()))?;
        if tp.mode == FragmentationMode::None {
            out.derivation_hints.insert(
                tp.table.clone(),
                DerivationHint {
                    parent: tp.derive_from.clone(),
                    refresh: tp.refresh,
                    refresh_defaulted: tp.refresh_defaulted,
                },
            );
            continue;
        }
        if !table.has_primary_key() {
            return Err(PlanError::NoPrimaryKey(tp.table.clone()));
        }
        let (fragments, tree) = expand_table(table, topology, tp)?;
        for f in fragments {
            out.push_fragment(f)?;
        }
        out.table_trees.insert(tp.table.clone(), tree);
    }
    Ok(out)
}

/// [`plan`] followed by [`derive_fragments`].
pub fn plan_with_derivation(
    schema: &Schema,
    topology: &Topology,
    policy: &DistributionPolicy,
) -> Result<FragmentationPlan, PlanError> {
    derive_fragments(plan(schema, topology, policy)?, schema)
}

fn expand_table(
    table: &Table,
    topology: &Topology,
    tp: &TablePolicy,
) -> Result<(Vec<Fragment>, TableTree), PlanError> {
    let name = table.name();
    let all_columns: Vec<String> = table.columns().iter().map(|c| c.name.clone()).collect();
    let mut ex = Expander { table, topology, fragments: Vec::new() };
    let mut groups = Vec::new();

    let layout = match tp.mode {
        FragmentationMode::None => unreachable!("mode none has no fragments"),
        FragmentationMode::Horizontal => {
            let h = tp.horizontal.as_ref().expect("resolved horizontal spec");
            groups.push(ex.split(name, &all_columns, &[], h, FragmentKind::Horizontal)?);
            Layout::Horizontal
        }
        FragmentationMode::Vertical | FragmentationMode::Hybrid => {
            let h = tp.horizontal.as_ref().filter(|_| tp.mode == FragmentationMode::Hybrid);
            for v in tp.vertical.as_deref().expect("resolved vertical spec") {
                if let Some(c) = v.columns.iter().find(|c| table.column(c).is_none()) {
                    return Err(PlanError::UnknownColumn { table: name.to_string(), column: c.clone() });
                }
                let group = match h.filter(|h| v.columns.contains(&h.column)) {
                    Some(h) => ex.split(
                        &v.fragment_name,
                        &v.columns,
                        &v.shared_columns,
                        h,
                        FragmentKind::HybridLeaf,
                    )?,
                    None => ex.replicate(
                        &v.fragment_name,
                        &v.columns,
                        &v.shared_columns,
                        (&v.sites, &v.primary_site),
                        FragmentKind::Vertical,
                    )?,
                };
                groups.push(group);
            }
            if h.is_some() {
                Layout::Hybrid
            } else {
                Layout::Vertical
            }
        }
        FragmentationMode::ReplicateFull => {
            let r = tp.replication.as_ref().expect("resolved replication spec");
            groups.push(ex.replicate(
                name,
                &all_columns,
                &[],
                (&r.sites, &r.primary_site),
                FragmentKind::FullReplica,
            )?);
            Layout::ReplicateFull
        }
    };

    let tree = TableTree {
        table: name.to_string(),
        layout,
        horizontal: tp.horizontal.clone().filter(|_| matches!(layout, Layout::Horizontal | Layout::Hybrid)),
        groups,
        refresh: tp.refresh,
        refresh_defaulted: tp.refresh_defaulted,
    };
    Ok((ex.fragments, tree))
}

struct Expander<'a> {
    table: &'a Table,
    topology: &'a Topology,
    fragments: Vec<Fragment>,
}

impl Expander<'_> {
    fn check_site(&self, site: &str) -> Result<(), PlanError> {
        match self.topology.site(site) {
            Some(_) => Ok(()),
            None => {
                Err(PlanError::UnknownSite { table: self.table.name().to_string(), site: site.to_string() })
            }
        }
    }

    /// One fragment per site the horizontal spec assigns; the default site,
    /// if any, gets the catch-all predicate.
    fn split(
        &mut self,
        group: &str,
        columns: &[String],
        shared: &[String],
        h: &HorizontalSpec,
        kind: FragmentKind,
    ) -> Result<FragmentGroup, PlanError> {
        if self.table.column(&h.column).is_none() {
            return Err(PlanError::UnknownColumn {
                table: self.table.name().to_string(),
                column: h.column.clone(),
            });
        }
        let mut members = Vec::new();
        for site in h.fragment_sites(self.topology) {
            self.check_site(&site)?;
            let predicate = if h.default_site.as_deref() == Some(site.as_str()) {
                Predicate { column: h.column.clone(), kind: PredicateKind::CatchAll, values: Vec::new() }
            } else {
                Predicate {
                    column: h.column.clone(),
                    kind: PredicateKind::InList,
                    values: h.values_for(&site).to_vec(),
                }
            };
            let id = fragment_id(group, &site);
            members.push(id.clone());
            self.fragments.push(Fragment {
                id,
                table: self.table.name().to_string(),
                kind,
                group: group.to_string(),
                columns: columns.to_vec(),
                predicate: Some(predicate),
                site,
                primary_copy: true,
                parent_fragment: None,
            });
        }
        Ok(FragmentGroup {
            name: group.to_string(),
            columns: columns.to_vec(),
            shared_columns: shared.to_vec(),
            split: true,
            members,
        })
    }

    /// One full copy of the group per site.
    fn replicate(
        &mut self,
        group: &str,
        columns: &[String],
        shared: &[String],
        (sites, primary): (&[String], &str),
        kind: FragmentKind,
    ) -> Result<FragmentGroup, PlanError> {
        let mut members = Vec::new();
        for site in sites {
            self.check_site(site)?;
            let id = fragment_id(group, site);
            members.push(id.clone());
            self.fragments.push(Fragment {
                id,
                table: self.table.name().to_string(),
                kind,
                group: group.to_string(),
                columns: columns.to_vec(),
                predicate: None,
                site: site.clone(),
                primary_copy: site == primary,
                parent_fragment: None,
            });
        }
        Ok(FragmentGroup {
            name: group.to_string(),
            columns: columns.to_vec(),
            shared_columns: shared.to_vec(),
            split: false,
            members,
        })
    }
}

impl FragmentationPlan {
    fn push_fragment(&mut self, fragment: Fragment) -> Result<(), PlanError> {
        if self.schema.contains(&fragment.id) {
            return Err(PlanError::ShadowsTable(fragment.id));
        }
        if self.fragment(&fragment.id).is_some() {
            return Err(PlanError::DuplicateFragmentId(fragment.id));
        }
        self.fragments.push(fragment);
        Ok(())
    }

    pub fn fragment(&self, id: &str) -> Option<&Fragment> {
        self.fragments.iter().find(|f| f.id == id)
    }

    pub fn fragments_of<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a Fragment> + 'a {
        self.fragments.iter().filter(move |f| f.table == table)
    }

    pub fn fragments_on<'a>(&'a self, site: &'a str) -> impl Iterator<Item = &'a Fragment> + 'a {
        self.fragments.iter().filter(move |f| f.site == site)
    }

    pub fn tree(&self, table: &str) -> Option<&TableTree> {
        self.table_trees.get(table)
    }

    /// Tables that have fragments, in plan order.
    pub fn fragmented_tables(&self) -> impl Iterator<Item = &str> {
        self.table_trees.keys().map(String::as_str)
    }

    pub fn is_fragmented(&self, table: &str) -> bool {
        self.table_trees.contains_key(table)
    }

    /// Fragments partitioning the rows of `table`: the members of its first
    /// horizontally split group. Empty when the table is not split.
    pub fn partition_fragments(&self, table: &str) -> Vec<&Fragment> {
        self.tree(table)
            .and_then(TableTree::partition_group)
            .map(|g| g.members.iter().filter_map(|id| self.fragment(id)).collect())
            .unwrap_or_default()
    }

    /// The primary copy among the members of a replicated group.
    pub fn primary_of<'a>(&'a self, group: &'a FragmentGroup) -> Option<&'a Fragment> {
        group.members.iter().filter_map(|id| self.fragment(id)).find(|f| f.primary_copy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn redacted(&self, placeholder: &str) -> Self {
        Self { topology: self.topology.redacted(placeholder), ..self.clone() }
    }
}
