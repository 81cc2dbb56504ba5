//! Seeded random datasets that conform to a schema and fit a plan.

use std::collections::HashSet;

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;
use thiserror::Error;

use super::Dataset;
use crate::fragmenter::FragmentationPlan;
use crate::schema::{ColumnType, Schema, Table};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("NOT NULL foreign keys form a cycle through {}", .0.join(", "))]
    Cycle(Vec<String>),
}

const KEY_ATTEMPTS: usize = 20;
const TEXT_CHARS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789 '-";

/// Up to `max_rows` rows per table, reproducible from `seed`.
///
/// Partitioning columns draw from the values the plan assigns (plus
/// arbitrary values when a default site exists), foreign keys point at
/// generated parent rows, and primary keys are unique. Every generated row
/// can therefore be placed by the plan, as long as the plan is valid.
pub fn generate_dataset(
    plan: &FragmentationPlan,
    seed: u64,
    max_rows: usize,
) -> Result<Dataset, GenerateError> {
    let schema = &plan.schema;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Dataset::empty(schema);
    for name in fill_order(schema)? {
        let table = schema.table(&name).expect("schema table");
        let target = rng.random_range(0..=max_rows);
        let mut keys: HashSet<Vec<Value>> = HashSet::new();
        for _ in 0..target {
            let mut placed = false;
            for _ in 0..KEY_ATTEMPTS {
                let Some(row) = random_row(plan, &data, table, &mut rng) else { break };
                let key: Vec<Value> = table.key_indices().iter().map(|&i| row[i].clone()).collect();
                if table.has_primary_key() && !keys.insert(key) {
                    continue;
                }
                data.relation_mut(table.name()).expect("dataset covers the schema").rows.push(row);
                placed = true;
                break;
            }
            if !placed {
                break;
            }
        }
    }
    Ok(data)
}

/// Parents before children. A foreign key whose columns are all nullable
/// may be left NULL to break a cycle.
fn fill_order(schema: &Schema) -> Result<Vec<String>, GenerateError> {
    let mut pending: Vec<&Table> = schema.tables().collect();
    let mut order: Vec<String> = Vec::new();
    while !pending.is_empty() {
        let ready = |t: &Table, strict: bool| {
            t.foreign_keys().iter().all(|fk| {
                fk.ref_table == t.name()
                    || order.contains(&fk.ref_table)
                    || !schema.contains(&fk.ref_table)
                    || (!strict && fk.columns.iter().all(|c| t.column(c).is_some_and(|col| col.nullable)))
            })
        };
        let pick = pending
            .iter()
            .position(|t| ready(t, true))
            .or_else(|| pending.iter().position(|t| ready(t, false)));
        match pick {
            Some(i) => order.push(pending.remove(i).name().to_string()),
            None => return Err(GenerateError::Cycle(pending.iter().map(|t| t.name().to_string()).collect())),
        }
    }
    Ok(order)
}

fn random_row(
    plan: &FragmentationPlan,
    data: &Dataset,
    table: &Table,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Value>> {
    let mut row: Vec<Option<Value>> = vec![None; table.columns().len()];
    let derived_fk = plan.derived_edges.get(table.name()).map(|e| &e.foreign_key);

    for fk in table.foreign_keys() {
        let Some(parent) = data.relation(&fk.ref_table) else { continue };
        let nullable = fk.columns.iter().all(|c| table.column(c).is_some_and(|col| col.nullable));
        let must_reference = derived_fk == Some(fk);
        let idx: Vec<usize> = fk.columns.iter().map(|c| table.column_index(c).expect("fk column")).collect();
        if idx.iter().any(|&i| row[i].is_some()) {
            continue;
        }
        let chosen = if fk.ref_table == table.name() {
            // Self references would need rows generated earlier in this
            // table; keep them NULL when allowed.
            None
        } else if nullable && !must_reference && rng.random_bool(0.1) {
            None
        } else {
            parent.rows.choose(rng)
        };
        match chosen {
            Some(prow) => {
                for (&i, v) in idx.iter().zip(parent.pick(prow, &fk.ref_columns)) {
                    row[i] = Some(v);
                }
            }
            None if nullable && !must_reference => {
                for &i in &idx {
                    row[i] = Some(Value::Null);
                }
            }
            None => return None,
        }
    }

    let split_column = plan.tree(table.name()).and_then(|t| t.horizontal.as_ref());
    for (i, col) in table.columns().iter().enumerate() {
        if row[i].is_some() {
            continue;
        }
        let value = match split_column.filter(|h| h.column == col.name) {
            Some(h) => {
                let mut pool: Vec<&Value> = h.assignments.iter().flat_map(|(_, vs)| vs).collect();
                if h.default_site.is_some() {
                    pool.extend(h.declared_domain.iter().flatten());
                }
                if h.default_site.is_some() && rng.random_bool(0.2) {
                    random_value(&col.ctype, rng)
                } else {
                    (*pool.choose(rng).expect("horizontal spec lists values")).clone()
                }
            }
            None if col.nullable && !table.is_key_column(&col.name) && rng.random_bool(0.1) => Value::Null,
            None => random_value(&col.ctype, rng),
        };
        row[i] = Some(value);
    }
    Some(row.into_iter().map(|v| v.expect("every column filled")).collect())
}

fn random_value(ctype: &ColumnType, rng: &mut ChaCha8Rng) -> Value {
    match ctype {
        ColumnType::Number => {
            let mantissa = rng.random_range(-99_999i64..=99_999);
            let scale = if rng.random_bool(0.25) { 2 } else { 0 };
            Value::Number(Decimal::new(mantissa, scale))
        }
        ColumnType::Varchar { length, .. } => {
            let len = rng.random_range(1..=(*length).clamp(1, 12) as usize);
            let text: String = (0..len).map(|_| *TEXT_CHARS.choose(rng).expect("alphabet") as char).collect();
            Value::Text(text)
        }
        ColumnType::Date => {
            let base = NaiveDate::from_ymd_opt(1950, 1, 1).expect("valid date");
            Value::Date(base + Days::new(rng.random_range(0..30_000)))
        }
    }
}
