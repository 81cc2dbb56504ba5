//! Correctness checks over a fragmentation plan: reconstruction,
//! completeness and disjointness per fragmented table, plus structural
//! rules on individual fragments.
//!
//! Horizontal checks reason over the declared value lists only; they never
//! look at data. [`validate_with_sample`] adds an empirical round-trip check
//! on top when sample rows are available.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::fragmenter::{Fragment, FragmentationPlan, Layout, TableTree};
use crate::policy::HorizontalSpec;
use crate::schema::Schema;
use crate::simulator::{self, Dataset};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Reconstruction,
    Completeness,
    Disjointness,
    Structural,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Reconstruction => "reconstruction",
            Criterion::Completeness => "completeness",
            Criterion::Disjointness => "disjointness",
            Criterion::Structural => "structural",
        })
    }
}

/// Outcome of one check. Declaration order is severity order, so `max`
/// picks the worst of several levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Pass,
    Warning,
    /// The check cannot be decided from the declarations alone.
    Indeterminate,
    Error,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Pass => "pass",
            Level::Warning => "warning",
            Level::Indeterminate => "indeterminate",
            Level::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: Criterion,
    pub level: Level,
    pub table: String,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Valid,
    ValidWithWarnings,
    Invalid,
}

impl fmt::Display for Overall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Overall::Valid => "valid",
            Overall::ValidWithWarnings => "valid_with_warnings",
            Overall::Invalid => "invalid",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub verdicts: Vec<Verdict>,
    pub overall: Overall,
}

impl ValidationReport {
    fn from_verdicts(verdicts: Vec<Verdict>) -> Self {
        let worst = verdicts.iter().map(|v| v.level).max().unwrap_or(Level::Pass);
        let overall = match worst {
            Level::Pass => Overall::Valid,
            Level::Warning | Level::Indeterminate => Overall::ValidWithWarnings,
            Level::Error => Overall::Invalid,
        };
        Self { verdicts, overall }
    }

    pub fn is_invalid(&self) -> bool {
        self.overall == Overall::Invalid
    }

    pub fn verdict(&self, table: &str, criterion: Criterion) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.table == table && v.criterion == criterion)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text rendering, one line per verdict with its messages
    /// indented below.
    pub fn render_text(&self) -> String {
        let width = self.verdicts.iter().map(|v| v.table.len()).max().unwrap_or(0);
        let mut out = String::new();
        for v in &self.verdicts {
            let _ = writeln!(out, "{:<width$}  {:<14}  {}", v.table, v.criterion.to_string(), v.level);
            for m in &v.messages {
                let _ = writeln!(out, "    {m}");
            }
        }
        let _ = writeln!(out, "overall: {}", self.overall);
        out
    }
}

/// Levels of the three criteria for one table before they become verdicts.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Findings {
    reconstruction: (Level, Vec<String>),
    completeness: (Level, Vec<String>),
    disjointness: (Level, Vec<String>),
}

impl Findings {
    fn pass() -> Self {
        Self {
            reconstruction: (Level::Pass, Vec::new()),
            completeness: (Level::Pass, Vec::new()),
            disjointness: (Level::Pass, Vec::new()),
        }
    }

    fn merge(mut self, other: Findings) -> Self {
        for (mine, theirs) in [
            (&mut self.reconstruction, other.reconstruction),
            (&mut self.completeness, other.completeness),
            (&mut self.disjointness, other.disjointness),
        ] {
            mine.0 = mine.0.max(theirs.0);
            mine.1.extend(theirs.1);
        }
        self
    }

    fn into_verdicts(self, table: &str) -> [Verdict; 3] {
        let v = |criterion, (level, messages): (Level, Vec<String>)| Verdict {
            criterion,
            level,
            table: table.to_string(),
            messages,
        };
        [
            v(Criterion::Reconstruction, self.reconstruction),
            v(Criterion::Completeness, self.completeness),
            v(Criterion::Disjointness, self.disjointness),
        ]
    }
}

/// Check every fragmented table of `plan`.
///
/// Verdicts come as reconstruction, completeness, disjointness for each
/// table in plan order, followed by one structural verdict per table.
pub fn validate(plan: &FragmentationPlan, schema: &Schema) -> ValidationReport {
    let mut verdicts = Vec::new();
    let mut structural = Vec::new();
    for (name, tree) in &plan.table_trees {
        verdicts.extend(table_findings(plan, schema, tree).into_verdicts(name));
        structural.push(structural_verdict(plan, schema, tree));
    }
    verdicts.extend(structural);
    ValidationReport::from_verdicts(verdicts)
}

/// [`validate`], then distribute and reconstruct `sample` and downgrade
/// reconstruction to error for every table that does not come back intact.
pub fn validate_with_sample(plan: &FragmentationPlan, schema: &Schema, sample: &Dataset) -> ValidationReport {
    let mut report = validate(plan, schema);
    if report.is_invalid() {
        return report;
    }
    let mut failures: Vec<(String, String)> = Vec::new();
    match simulator::distribute(plan, sample) {
        Err(e) => failures.push((e.table().to_string(), format!("sample data: {e}"))),
        Ok(image) => match simulator::reconstruct(&image, plan) {
            Err(e) => failures.push((e.table().to_string(), format!("sample data: {e}"))),
            Ok(rebuilt) => {
                for table in plan.fragmented_tables() {
                    let same = match (sample.relation(table), rebuilt.relation(table)) {
                        (Some(a), Some(b)) => a.multiset_eq(b),
                        _ => false,
                    };
                    if !same {
                        failures.push((
                            table.to_string(),
                            "sample data: rows rebuilt from the fragments differ from the original".into(),
                        ));
                    }
                }
            }
        },
    }
    for (table, message) in failures {
        if let Some(v) =
            report.verdicts.iter_mut().find(|v| v.table == table && v.criterion == Criterion::Reconstruction)
        {
            v.level = Level::Error;
            v.messages.push(message);
        }
    }
    ValidationReport::from_verdicts(report.verdicts)
}

/// Error message when `fragment` does not carry its table's full primary
/// key; such a fragment cannot take part in a key join or key check.
pub fn check_fragment_pk(fragment: &Fragment, schema: &Schema) -> Option<String> {
    let table = schema.table(&fragment.table)?;
    let missing: Vec<&str> =
        table.primary_key().iter().filter(|k| !fragment.columns.contains(k)).map(String::as_str).collect();
    if table.primary_key().is_empty() {
        return Some(format!("fragment {} belongs to a table without a primary key", fragment.id));
    }
    if missing.is_empty() {
        None
    } else {
        Some(format!("fragment {} lacks primary key column(s) {}", fragment.id, missing.join(", ")))
    }
}

fn table_findings(plan: &FragmentationPlan, schema: &Schema, tree: &TableTree) -> Findings {
    match tree.layout {
        Layout::Horizontal => horizontal_findings(tree.horizontal.as_ref().expect("horizontal spec")),
        Layout::Vertical => vertical_findings(plan, schema, tree),
        Layout::Hybrid => horizontal_findings(tree.horizontal.as_ref().expect("horizontal spec"))
            .merge(vertical_findings(plan, schema, tree)),
        Layout::ReplicateFull => Findings::pass(),
        Layout::Derived => derived_findings(plan, schema, tree),
    }
}

/// Value-list reasoning for one horizontal split.
fn horizontal_findings(h: &HorizontalSpec) -> Findings {
    let mut f = Findings::pass();

    let mut overlaps: Vec<String> = Vec::new();
    let mut seen: Vec<&Value> = Vec::new();
    for (i, (_, values)) in h.assignments.iter().enumerate() {
        for v in values {
            if seen.contains(&v) {
                continue;
            }
            let sites: Vec<&str> =
                h.assignments[i..].iter().filter(|(_, vs)| vs.contains(v)).map(|(s, _)| s.as_str()).collect();
            if sites.len() > 1 {
                seen.push(v);
                overlaps.push(format!("value {v} of {} is assigned to sites {}", h.column, sites.join(", ")));
            }
        }
    }
    if !overlaps.is_empty() {
        f.disjointness = (Level::Error, overlaps);
    }

    if h.default_site.is_none() {
        f.completeness = match &h.declared_domain {
            None => (
                Level::Indeterminate,
                vec![format!(
                    "{} has neither a default site nor a declared domain; rows with unlisted values cannot be placed",
                    h.column
                )],
            ),
            Some(domain) => {
                let uncovered: Vec<String> = domain
                    .iter()
                    .filter(|d| !h.assignments.iter().any(|(_, vs)| vs.contains(d)))
                    .map(Value::to_string)
                    .collect();
                if uncovered.is_empty() {
                    (Level::Pass, Vec::new())
                } else {
                    (
                        Level::Error,
                        vec![format!(
                            "declared value(s) {} of {} are assigned to no site",
                            uncovered.join(", "),
                            h.column
                        )],
                    )
                }
            }
        };
    }

    f.reconstruction = reconstruction_from(&f.completeness, &f.disjointness);
    f
}

fn reconstruction_from(
    completeness: &(Level, Vec<String>),
    disjointness: &(Level, Vec<String>),
) -> (Level, Vec<String>) {
    let level = completeness.0.max(disjointness.0);
    let messages = match level {
        Level::Pass => Vec::new(),
        Level::Error => vec!["the union of the fragments does not rebuild the table exactly".into()],
        _ => vec!["reconstruction holds only for rows whose values are covered by the fragments".into()],
    };
    (level, messages)
}

fn vertical_findings(plan: &FragmentationPlan, schema: &Schema, tree: &TableTree) -> Findings {
    let mut f = Findings::pass();
    let table = schema.table(&tree.table).expect("plan table in schema");

    let uncovered: Vec<&str> = table
        .columns()
        .iter()
        .map(|c| c.name.as_str())
        .filter(|c| !tree.groups.iter().any(|g| g.columns.iter().any(|gc| gc == c)))
        .collect();
    if !uncovered.is_empty() {
        f.completeness =
            (Level::Error, vec![format!("column(s) {} are stored in no fragment", uncovered.join(", "))]);
    }

    let mut level = Level::Pass;
    let mut messages = Vec::new();
    for col in table.columns().iter().map(|c| &c.name).filter(|c| !table.is_key_column(c)) {
        let holders: Vec<_> = tree.groups.iter().filter(|g| g.columns.contains(col)).collect();
        if holders.len() < 2 {
            continue;
        }
        let names: Vec<&str> = holders.iter().map(|g| g.name.as_str()).collect();
        let owners = holders.iter().filter(|g| !g.shared_columns.contains(col)).count();
        if owners <= 1 {
            level = level.max(Level::Warning);
            messages.push(format!("column {col} is stored in {} (declared shared)", names.join(", ")));
        } else {
            level = Level::Error;
            messages.push(format!(
                "column {col} is stored in {} without being declared shared",
                names.join(", ")
            ));
        }
    }
    f.disjointness = (level, messages);

    let keyless: Vec<String> = tree
        .groups
        .iter()
        .flat_map(|g| &g.members)
        .filter_map(|id| plan.fragment(id))
        .filter(|frag| check_fragment_pk(frag, schema).is_some())
        .map(|frag| frag.id.clone())
        .collect();
    if !keyless.is_empty() {
        f.reconstruction = (
            Level::Error,
            vec![format!(
                "fragment(s) {} lack the primary key, so the key join cannot rebuild the table",
                keyless.join(", ")
            )],
        );
    }
    f
}

/// A derived table partitions exactly as its parent's rows do.
fn derived_findings(plan: &FragmentationPlan, schema: &Schema, tree: &TableTree) -> Findings {
    let edge = &plan.derived_edges[&tree.table];
    let parent_tree = plan.tree(&edge.parent).expect("derivation parent in plan");
    let mut f = Findings::pass();
    let inherit = |(level, _): &(Level, Vec<String>)| match level {
        Level::Pass => (Level::Pass, Vec::new()),
        level => (*level, vec![format!("inherited from {}", edge.parent)]),
    };
    // Only the row partition matters here; a parent's vertical sharing does
    // not duplicate child rows.
    let parent_split = parent_tree
        .horizontal
        .as_ref()
        .map(horizontal_findings)
        .unwrap_or_else(|| table_findings(plan, schema, parent_tree));
    f.completeness = inherit(&parent_split.completeness);
    f.disjointness = inherit(&parent_split.disjointness);

    let table = schema.table(&tree.table).expect("plan table in schema");
    let nullable: Vec<&str> = edge
        .foreign_key
        .columns
        .iter()
        .filter(|c| table.column(c).is_some_and(|col| col.nullable))
        .map(String::as_str)
        .collect();
    if !nullable.is_empty() && f.completeness.0 < Level::Indeterminate {
        f.completeness = (
            Level::Indeterminate,
            vec![format!(
                "foreign key column(s) {} may be NULL; such rows follow no parent fragment",
                nullable.join(", ")
            )],
        );
    }
    f.reconstruction = reconstruction_from(&f.completeness, &f.disjointness);
    f
}

fn structural_verdict(plan: &FragmentationPlan, schema: &Schema, tree: &TableTree) -> Verdict {
    let mut level = Level::Pass;
    let mut messages = Vec::new();
    for frag in tree.groups.iter().flat_map(|g| &g.members).filter_map(|id| plan.fragment(id)) {
        if let Some(m) = check_fragment_pk(frag, schema) {
            level = Level::Error;
            messages.push(m);
        }
    }
    if let Some(h) = &tree.horizontal {
        if let Some(domain) = &h.declared_domain {
            let stray: BTreeSet<String> = h
                .assignments
                .iter()
                .flat_map(|(_, vs)| vs)
                .filter(|v| !domain.contains(v))
                .map(Value::to_string)
                .collect();
            if !stray.is_empty() {
                level = level.max(Level::Warning);
                messages.push(format!(
                    "assigned value(s) {} lie outside the declared domain of {}",
                    stray.into_iter().collect::<Vec<_>>().join(", "),
                    h.column
                ));
            }
        }
    }
    for g in tree.groups.iter().filter(|g| !g.split) {
        let primaries =
            g.members.iter().filter_map(|id| plan.fragment(id)).filter(|f| f.primary_copy).count();
        if primaries != 1 {
            level = Level::Error;
            messages.push(format!("group {} has {primaries} primary copies instead of one", g.name));
        }
    }
    Verdict { criterion: Criterion::Structural, level, table: tree.table.clone(), messages }
}
