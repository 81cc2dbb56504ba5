//! Per-site Oracle scripts for a validated plan.
//!
//! Each site script creates, in this order: a commented account stub, one
//! database link per other site, the fragments stored at the site, synonyms
//! for fragments stored elsewhere, materialized views (replicas, then one
//! view rebuilding each fragmented table), insert triggers, and helper
//! procedures. Output depends only on the plan, never on hashing order.

mod bundle;
pub mod templates;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fragmenter::{Fragment, FragmentGroup, FragmentationPlan, Layout, PredicateKind, TableTree};
use crate::ident;
use crate::schema::Table;
use crate::topology::Site;
use crate::validator::{validate, Level};

pub use bundle::{emit_bundle, generate_bundle, script_filename, ScriptBundle, MANIFEST_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    AccountStub,
    Dblink,
    Table,
    Synonym,
    Mview,
    Trigger,
    Procedure,
    Comment,
}

impl StatementKind {
    /// Label used in the `-- DDL for <label> <name>` banner.
    pub fn label(self) -> &'static str {
        match self {
            StatementKind::AccountStub => "account",
            StatementKind::Dblink => "DB Link",
            StatementKind::Table => "Table",
            StatementKind::Synonym => "Synonym",
            StatementKind::Mview => "materialized view",
            StatementKind::Trigger => "trigger",
            StatementKind::Procedure => "procedure",
            StatementKind::Comment => "notes",
        }
    }
}

impl fmt::Display for StatementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One statement with its banner. `text` always starts with the banner
/// naming `kind` and `object_name`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlStatement {
    pub kind: StatementKind,
    pub object_name: String,
    pub text: String,
}

impl SqlStatement {
    fn new(kind: StatementKind, object_name: &str, body: String) -> Self {
        let text = format!("{}{body}", templates::banner(kind.label(), object_name));
        Self { kind, object_name: object_name.to_string(), text }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteScript {
    pub site: String,
    pub statements: Vec<SqlStatement>,
}

impl SiteScript {
    pub fn filename(&self) -> String {
        script_filename(&self.site)
    }

    pub fn render(&self) -> String {
        self.statements.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join("\n")
    }

    pub fn statements_of(&self, kind: StatementKind) -> impl Iterator<Item = &SqlStatement> {
        self.statements.iter().filter(move |s| s.kind == kind)
    }
}

#[derive(Debug, Error)]
pub enum CodegenError {
    #[error("the plan does not validate: {}", .0.join("; "))]
    InvalidPlan(Vec<String>),
    #[error("site {0} is not in the plan's topology")]
    UnknownSite(String),
    #[error("site {site}: object name {name} would be created twice")]
    NameCollision { site: String, name: String },
    #[error("sites {0} and {1} map to the same script file name")]
    FilenameCollision(String, String),
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Script for one site. Fails when the plan has validation errors.
pub fn generate_site_script(plan: &FragmentationPlan, site: &str) -> Result<SiteScript, CodegenError> {
    ensure_valid(plan)?;
    build_site_script(plan, site)
}

pub(crate) fn ensure_valid(plan: &FragmentationPlan) -> Result<(), CodegenError> {
    let report = validate(plan, &plan.schema);
    if report.is_invalid() {
        let problems = report
            .verdicts
            .iter()
            .filter(|v| v.level == Level::Error)
            .map(|v| format!("{} {}: {}", v.table, v.criterion, v.messages.join(", ")))
            .collect();
        return Err(CodegenError::InvalidPlan(problems));
    }
    Ok(())
}

pub(crate) fn build_site_script(plan: &FragmentationPlan, site: &str) -> Result<SiteScript, CodegenError> {
    let here = plan.topology.site(site).ok_or_else(|| CodegenError::UnknownSite(site.to_string()))?;
    let g = Generator { plan, here };
    let mut statements = vec![SqlStatement::new(
        StatementKind::AccountStub,
        &here.credentials.user,
        templates::account_stub(here),
    )];
    statements.extend(g.dblinks());
    if plan.fragments.is_empty() {
        statements.push(SqlStatement::new(
            StatementKind::Comment,
            here.logical_name.as_str(),
            "-- The plan has no fragments; nothing else is created at this site.\n".into(),
        ));
    }
    statements.extend(g.tables());
    statements.extend(g.synonyms());
    statements.extend(g.replica_views());
    statements.extend(g.reconstruction_views());
    statements.extend(g.triggers());
    statements.extend(g.procedures());
    check_names(site, &statements)?;
    Ok(SiteScript { site: site.to_string(), statements })
}

/// Tables, views, synonyms and procedures share one Oracle namespace.
fn check_names(site: &str, statements: &[SqlStatement]) -> Result<(), CodegenError> {
    let mut seen = BTreeSet::new();
    for s in statements {
        if matches!(
            s.kind,
            StatementKind::Table | StatementKind::Synonym | StatementKind::Mview | StatementKind::Procedure
        ) && !seen.insert(s.object_name.as_str())
        {
            return Err(CodegenError::NameCollision { site: site.to_string(), name: s.object_name.clone() });
        }
    }
    Ok(())
}

struct Generator<'a> {
    plan: &'a FragmentationPlan,
    here: &'a Site,
}

impl<'a> Generator<'a> {
    fn table(&self, name: &str) -> &'a Table {
        self.plan.schema.table(name).expect("plan table in schema")
    }

    fn members(&self, group: &'a FragmentGroup) -> impl Iterator<Item = &'a Fragment> + 'a {
        let plan = self.plan;
        group.members.iter().filter_map(move |id| plan.fragment(id))
    }

    fn primary(&self, group: &'a FragmentGroup) -> &'a Fragment {
        self.plan.primary_of(group).expect("replicated group has a primary copy")
    }

    fn is_local(&self, f: &Fragment) -> bool {
        f.site == self.here.logical_name
    }

    fn dblinks(&self) -> Vec<SqlStatement> {
        self.plan
            .topology
            .sites()
            .iter()
            .filter(|s| s.logical_name != self.here.logical_name)
            .map(|s| SqlStatement::new(StatementKind::Dblink, &s.dblink_name, templates::dblink(s)))
            .collect()
    }

    fn tables(&self) -> Vec<SqlStatement> {
        self.plan
            .fragments
            .iter()
            .filter(|f| self.is_local(f) && f.primary_copy)
            .map(|f| {
                let table = self.table(&f.table);
                let columns: Vec<_> =
                    f.columns.iter().map(|c| table.column(c).expect("fragment column")).collect();
                let text =
                    templates::create_table(&f.id, &columns, table.primary_key(), &format!("PK_{}", f.id));
                SqlStatement::new(StatementKind::Table, &f.id, text)
            })
            .collect()
    }

    fn synonyms(&self) -> Vec<SqlStatement> {
        self.plan
            .fragments
            .iter()
            .filter(|f| !self.is_local(f) && f.primary_copy)
            .map(|f| {
                let link = &self.plan.topology.site(&f.site).expect("fragment site in topology").dblink_name;
                SqlStatement::new(StatementKind::Synonym, &f.id, templates::synonym(&f.id, link))
            })
            .collect()
    }

    fn mview(&self, tree: &TableTree, name: &str, query: String) -> SqlStatement {
        let mut body = String::new();
        if tree.refresh_defaulted {
            body.push_str(&templates::refresh_default_note(&tree.refresh));
        }
        body.push_str(&templates::materialized_view(name, &tree.refresh, &query));
        SqlStatement::new(StatementKind::Mview, name, body)
    }

    /// Local copies of replicated groups whose primary copy is elsewhere.
    fn replica_views(&self) -> Vec<SqlStatement> {
        let mut out = Vec::new();
        for tree in self.plan.table_trees.values() {
            for group in tree.groups.iter().filter(|g| !g.split) {
                let primary = self.primary(group);
                for f in self.members(group).filter(|f| self.is_local(f) && !f.primary_copy) {
                    out.push(self.mview(tree, &f.id, templates::select(&f.columns, &primary.id)));
                }
            }
        }
        out
    }

    /// One view per fragmented table, named after it: a union over the
    /// partitions of each split group, joined on the key with the primary
    /// copies of the other groups.
    fn reconstruction_views(&self) -> Vec<SqlStatement> {
        self.plan
            .table_trees
            .iter()
            .map(|(name, tree)| self.mview(tree, name, self.reconstruction_query(tree)))
            .collect()
    }

    fn group_source(&self, group: &FragmentGroup) -> String {
        if group.split {
            let branches: Vec<String> =
                self.members(group).map(|f| templates::select(&group.columns, &f.id)).collect();
            templates::union(&branches)
        } else {
            templates::select(&group.columns, &self.primary(group).id)
        }
    }

    fn reconstruction_query(&self, tree: &TableTree) -> String {
        let table = self.table(&tree.table);
        let all: Vec<String> = table.columns().iter().map(|c| c.name.clone()).collect();
        if let [only] = tree.groups.as_slice() {
            return if only.split {
                self.group_source(only)
            } else {
                templates::select(&all, &self.primary(only).id)
            };
        }
        let alias = |i: usize| format!("G{i}");
        let picks: Vec<String> = all
            .iter()
            .map(|c| {
                let i = tree.groups.iter().position(|g| g.columns.contains(c)).expect("complete plan");
                format!("{}.{}", alias(i), ident::sql(c))
            })
            .collect();
        let mut query = format!("SELECT {}\nFROM ", picks.join(", "));
        for (i, group) in tree.groups.iter().enumerate() {
            let source = if group.split {
                format!("(\n{}\n) {}", self.group_source(group), alias(i))
            } else {
                format!("{} {}", ident::sql(&self.primary(group).id), alias(i))
            };
            if i == 0 {
                query.push_str(&source);
            } else {
                let on: Vec<String> = table
                    .primary_key()
                    .iter()
                    .map(|k| format!("{}.{k} = {}.{k}", alias(i), alias(0), k = ident::sql(k)))
                    .collect();
                query.push_str(&format!("\nJOIN {source} ON {}", on.join(" AND ")));
            }
        }
        query
    }

    /// Foreign keys of `table` checked by its FK trigger: those into other
    /// fragmented tables.
    fn checked_foreign_keys(&self, table: &'a Table) -> Vec<&'a crate::schema::ForeignKey> {
        table
            .foreign_keys()
            .iter()
            .filter(|fk| fk.ref_table != table.name() && self.plan.is_fragmented(&fk.ref_table))
            .collect()
    }

    fn triggers(&self) -> Vec<SqlStatement> {
        let mut out = Vec::new();
        for (name, tree) in &self.plan.table_trees {
            let table = self.table(name);
            let fks = self.checked_foreign_keys(table);
            let fk_trigger = (!fks.is_empty()).then(|| templates::fk_trigger_name(name));
            if let Some(trigger) = &fk_trigger {
                out.push(SqlStatement::new(
                    StatementKind::Trigger,
                    trigger,
                    fk_trigger_text(trigger, table, &fks),
                ));
            }
            let routing = templates::routing_trigger_name(name);
            let text = self.routing_trigger(&routing, table, tree, fk_trigger.as_deref());
            out.push(SqlStatement::new(StatementKind::Trigger, &routing, text));
        }
        out
    }

    fn insert_into(&self, f: &Fragment, indent: &str) -> String {
        let values: Vec<String> = f.columns.iter().map(|c| templates::new_ref(c)).collect();
        templates::insert(&f.id, &f.columns, &values, indent)
    }

    fn routing_trigger(&self, name: &str, table: &Table, tree: &TableTree, follows: Option<&str>) -> String {
        let key = table.primary_key();
        let derived_members: Vec<&Fragment> = match tree.layout {
            Layout::Derived => self.members(&tree.groups[0]).collect(),
            _ => Vec::new(),
        };

        let mut out = templates::trigger_header(name, table.name(), follows);
        out.push_str("DECLARE\n  excep EXCEPTION;\n  nbTuples NUMBER;\n");
        for i in 1..=derived_members.len() {
            out.push_str(&format!("  nbParent{i} NUMBER;\n"));
        }
        out.push_str("BEGIN\n  nbTuples := 0;\n");
        let key_values: Vec<String> = key.iter().map(|k| templates::new_ref(k)).collect();
        out.push_str(&format!(
            "  SELECT COUNT(*) INTO nbTuples FROM {} WHERE {};\n",
            ident::sql(table.name()),
            templates::key_match(key, &key_values)
        ));
        out.push_str("  IF nbTuples > 0 THEN\n    RAISE excep;\n  END IF;\n");

        let unroutable = |what: &str| {
            format!(
                "    {}\n",
                templates::raise(
                    templates::UNROUTABLE_CODE,
                    &format!("no fragment of {} accepts {what}", table.name())
                )
            )
        };
        for group in &tree.groups {
            if !group.split {
                out.push_str(&self.insert_into(self.primary(group), "  "));
                continue;
            }
            if tree.layout == Layout::Derived {
                let edge = &self.plan.derived_edges[table.name()];
                let fk_values: Vec<String> =
                    edge.foreign_key.columns.iter().map(|c| templates::new_ref(c)).collect();
                for (i, f) in derived_members.iter().enumerate() {
                    let parent = f.parent_fragment.as_deref().expect("derived fragment has a parent");
                    out.push_str(&format!(
                        "  SELECT COUNT(*) INTO nbParent{} FROM {} WHERE {};\n",
                        i + 1,
                        ident::sql(parent),
                        templates::key_match(&edge.foreign_key.ref_columns, &fk_values)
                    ));
                }
                for (i, f) in derived_members.iter().enumerate() {
                    let keyword = if i == 0 { "IF" } else { "ELSIF" };
                    out.push_str(&format!("  {keyword} nbParent{} > 0 THEN\n", i + 1));
                    out.push_str(&self.insert_into(f, "    "));
                }
                out.push_str("  ELSE\n");
                out.push_str(&unroutable(&format!("the {} reference", edge.parent)));
                out.push_str("  END IF;\n");
                continue;
            }
            let members: Vec<&Fragment> = self.members(group).collect();
            let listed: Vec<&Fragment> = members
                .iter()
                .copied()
                .filter(|f| f.predicate.as_ref().is_some_and(|p| p.kind == PredicateKind::InList))
                .collect();
            let catch_all = members
                .iter()
                .copied()
                .find(|f| f.predicate.as_ref().is_some_and(|p| p.kind == PredicateKind::CatchAll));
            if listed.is_empty() {
                if let Some(f) = catch_all {
                    out.push_str(&self.insert_into(f, "  "));
                }
                continue;
            }
            for (i, f) in listed.iter().enumerate() {
                let p = f.predicate.as_ref().expect("listed fragment has a predicate");
                let literals: Vec<String> = p.values.iter().map(|v| v.sql_literal()).collect();
                let keyword = if i == 0 { "IF" } else { "ELSIF" };
                out.push_str(&format!(
                    "  {keyword} {} IN ({}) THEN\n",
                    templates::new_ref(&p.column),
                    literals.join(", ")
                ));
                out.push_str(&self.insert_into(f, "    "));
            }
            out.push_str("  ELSE\n");
            match catch_all {
                Some(f) => out.push_str(&self.insert_into(f, "    ")),
                None => {
                    let column = &listed[0].predicate.as_ref().expect("predicate").column;
                    out.push_str(&unroutable(&format!("this {column} value")));
                }
            }
            out.push_str("  END IF;\n");
        }
        out.push_str("EXCEPTION\n  WHEN excep THEN\n    ");
        out.push_str(templates::PK_VIOLATION);
        out.push_str("\nEND;\n/\n");
        out
    }

    /// Insert, delete and update helpers per fragmented table. Inserts go
    /// through the table's view so the routing trigger decides placement.
    fn procedures(&self) -> Vec<SqlStatement> {
        let mut out = Vec::new();
        for (name, tree) in &self.plan.table_trees {
            let table = self.table(name);
            let params: Vec<(String, &crate::schema::Column)> =
                table.columns().iter().enumerate().map(|(i, c)| (parameter_name(&c.name, i), c)).collect();
            let key_params: Vec<&(String, &crate::schema::Column)> =
                params.iter().filter(|(_, c)| table.is_key_column(&c.name)).collect();
            let declare = |ps: &[&(String, &crate::schema::Column)]| {
                ps.iter()
                    .map(|(p, c)| format!("  {p} IN {}", templates::parameter_type(&c.ctype)))
                    .collect::<Vec<_>>()
                    .join(",\n")
            };
            let all_params: Vec<&(String, &crate::schema::Column)> = params.iter().collect();
            let columns: Vec<String> = table.columns().iter().map(|c| c.name.clone()).collect();
            let names: Vec<String> = params.iter().map(|(p, _)| p.clone()).collect();
            let key_names: Vec<String> = key_params.iter().map(|(p, _)| p.clone()).collect();

            let ins = templates::procedure_name("INS", name);
            let del = templates::procedure_name("DEL", name);
            let upd = templates::procedure_name("UPD", name);

            let mut body = format!(
                "CREATE OR REPLACE PROCEDURE {} (\n{}\n) AS\nBEGIN\n",
                ident::sql(&ins),
                declare(&all_params)
            );
            body.push_str(&templates::insert(name, &columns, &names, "  "));
            body.push_str("END;\n/\n");
            out.push(SqlStatement::new(StatementKind::Procedure, &ins, body));

            let mut body = format!(
                "CREATE OR REPLACE PROCEDURE {} (\n{}\n) AS\nBEGIN\n",
                ident::sql(&del),
                declare(&key_params)
            );
            for group in &tree.groups {
                let targets: Vec<&Fragment> =
                    if group.split { self.members(group).collect() } else { vec![self.primary(group)] };
                for f in targets {
                    body.push_str(&format!(
                        "  DELETE FROM {} WHERE {};\n",
                        ident::sql(&f.id),
                        templates::key_match(table.primary_key(), &key_names)
                    ));
                }
            }
            body.push_str(&format!("  {}\nEND;\n/\n", templates::mview_refresh_call(name)));
            out.push(SqlStatement::new(StatementKind::Procedure, &del, body));

            let body = format!(
                "CREATE OR REPLACE PROCEDURE {} (\n{}\n) AS\nBEGIN\n  {}({});\n  {}({});\nEND;\n/\n",
                ident::sql(&upd),
                declare(&all_params),
                ident::sql(&del),
                key_names.join(", "),
                ident::sql(&ins),
                names.join(", ")
            );
            out.push(SqlStatement::new(StatementKind::Procedure, &upd, body));
        }
        out
    }
}

fn parameter_name(column: &str, index: usize) -> String {
    let candidate = format!("P_{column}");
    if ident::is_plain(&candidate) && !ident::is_reserved(&candidate) {
        candidate
    } else {
        format!("P_{}", index + 1)
    }
}

fn fk_trigger_text(name: &str, table: &Table, fks: &[&crate::schema::ForeignKey]) -> String {
    let mut out = templates::trigger_header(name, table.name(), None);
    out.push_str("DECLARE\n  nbTuples NUMBER;\nBEGIN\n");
    for fk in fks {
        let values: Vec<String> = fk.columns.iter().map(|c| templates::new_ref(c)).collect();
        let not_null: Vec<String> = values.iter().map(|v| format!("{v} IS NOT NULL")).collect();
        let label = fk.name.clone().unwrap_or_else(|| format!("{} -> {}", table.name(), fk.ref_table));
        out.push_str(&format!("  IF {} THEN\n", not_null.join(" AND ")));
        out.push_str(&format!(
            "    SELECT COUNT(*) INTO nbTuples FROM {} WHERE {};\n",
            ident::sql(&fk.ref_table),
            templates::key_match(&fk.ref_columns, &values)
        ));
        out.push_str("    IF nbTuples = 0 THEN\n      ");
        out.push_str(&templates::raise(
            templates::FK_VIOLATION_CODE,
            &format!("foreign key violation {label}"),
        ));
        out.push_str("\n    END IF;\n  END IF;\n");
    }
    out.push_str("END;\n/\n");
    out
}
