//! Derived fragmentation along foreign keys.

use std::collections::BTreeSet;

use super::{
    fragment_id, DerivedEdge, Fragment, FragmentGroup, FragmentKind, FragmentationPlan, Layout, PlanError,
    TableTree,
};
use crate::policy::RefreshPolicy;
use crate::schema::Schema;

/// Fragment every non-fragmented table whose foreign key leads to a
/// horizontally partitioned table, one fragment per parent partition,
/// co-located with it. Applied transitively until a fixpoint.
///
/// A table with foreign keys into several partitioned tables is only
/// derived when its policy names the parent to follow.
pub fn derive_fragments(
    mut plan: FragmentationPlan,
    schema: &Schema,
) -> Result<FragmentationPlan, PlanError> {
    let partitioned_now =
        |plan: &FragmentationPlan, t: &str| plan.tree(t).is_some_and(|tr| tr.partition_group().is_some());
    let candidates: Vec<&str> = schema.table_names().filter(|t| !plan.is_fragmented(t)).collect();

    // Tables that end up partitioned once derivation has run to completion.
    let mut eventual: BTreeSet<String> =
        schema.table_names().filter(|t| partitioned_now(&plan, t)).map(str::to_string).collect();
    loop {
        let before = eventual.len();
        for t in &candidates {
            if eventual.contains(*t) {
                continue;
            }
            let table = schema.table(t).expect("schema table");
            if table.foreign_keys().iter().any(|fk| fk.ref_table != *t && eventual.contains(&fk.ref_table)) {
                eventual.insert(t.to_string());
            }
        }
        if eventual.len() == before {
            break;
        }
    }

    // Choose one parent per table to derive.
    let mut chosen: Vec<(String, DerivedEdge)> = Vec::new();
    for t in &candidates {
        let table = schema.table(t).expect("schema table");
        let hint = plan.derivation_hints.get(*t);
        let preferred = hint.and_then(|h| h.parent.clone());
        if !eventual.contains(*t) {
            if let Some(parent) = preferred {
                return Err(PlanError::BadDerivationPreference { table: t.to_string(), parent });
            }
            continue;
        }
        let mut parents: Vec<String> = Vec::new();
        for fk in table.foreign_keys() {
            if fk.ref_table != *t && eventual.contains(&fk.ref_table) && !parents.contains(&fk.ref_table) {
                parents.push(fk.ref_table.clone());
            }
        }
        let parent = match preferred {
            Some(p) if parents.contains(&p) => p,
            Some(p) => return Err(PlanError::BadDerivationPreference { table: t.to_string(), parent: p }),
            None if parents.len() == 1 => parents.remove(0),
            None => return Err(PlanError::AmbiguousDerivation { table: t.to_string(), parents }),
        };
        if !table.has_primary_key() {
            return Err(PlanError::NoPrimaryKey(t.to_string()));
        }
        let fk =
            table.foreign_keys().iter().find(|fk| fk.ref_table == parent).expect("parent reached via fk");
        let parent_key = schema.table(&parent).expect("schema table").primary_key();
        if fk.ref_columns.as_slice() != parent_key {
            return Err(PlanError::PartialKeyDerivation { table: t.to_string(), parent });
        }
        chosen.push((t.to_string(), DerivedEdge { foreign_key: fk.clone(), parent }));
    }

    // Materialize in dependency order.
    while !chosen.is_empty() {
        let ready = chosen.iter().position(|(_, edge)| partitioned_now(&plan, &edge.parent));
        let Some(i) = ready else {
            return Err(PlanError::DerivationCycle(chosen.into_iter().map(|(t, _)| t).collect()));
        };
        let (table_name, edge) = chosen.remove(i);
        let table = schema.table(&table_name).expect("schema table");
        let columns: Vec<String> = table.columns().iter().map(|c| c.name.clone()).collect();
        let parents: Vec<Fragment> = plan.partition_fragments(&edge.parent).into_iter().cloned().collect();

        let mut members = Vec::new();
        for parent in parents {
            let id = fragment_id(&table_name, &parent.site);
            members.push(id.clone());
            plan.push_fragment(Fragment {
                id,
                table: table_name.clone(),
                kind: FragmentKind::Derived,
                group: table_name.clone(),
                columns: columns.clone(),
                predicate: None,
                site: parent.site.clone(),
                primary_copy: true,
                parent_fragment: Some(parent.id.clone()),
            })?;
        }
        let (refresh, refresh_defaulted) = plan
            .derivation_hints
            .get(&table_name)
            .map(|h| (h.refresh, h.refresh_defaulted))
            .unwrap_or((RefreshPolicy::default(), true));
        plan.table_trees.insert(
            table_name.clone(),
            TableTree {
                table: table_name.clone(),
                layout: Layout::Derived,
                horizontal: None,
                groups: vec![FragmentGroup {
                    name: table_name.clone(),
                    columns,
                    shared_columns: Vec::new(),
                    split: true,
                    members,
                }],
                refresh,
                refresh_defaulted,
            },
        );
        plan.derived_edges.insert(table_name, edge);
    }
    Ok(plan)
}
