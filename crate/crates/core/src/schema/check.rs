use super::Schema;
use crate::diag::Diagnostic;

/// Cross-table checks: foreign key targets and key shapes, missing primary keys.
///
/// Findings are grouped by kind (unresolved targets, key mismatches, missing
/// keys) and ordered by table declaration order within each group.
pub fn check_schema(schema: &Schema) -> Vec<Diagnostic> {
    let mut unresolved = Vec::new();
    let mut mismatched = Vec::new();
    let mut keyless = Vec::new();

    for table in schema.tables() {
        for fk in table.foreign_keys() {
            let subject = format!("{}({})", table.name(), fk.columns.join(", "));
            match schema.table(&fk.ref_table) {
                None => unresolved.push(Diagnostic::error(
                    "fk-unresolved",
                    subject,
                    format!("foreign key references unknown table {}", fk.ref_table),
                )),
                Some(target) if target.primary_key() != fk.ref_columns.as_slice() => {
                    mismatched.push(Diagnostic::error(
                        "fk-key-mismatch",
                        subject,
                        format!(
                            "foreign key references ({}) but the primary key of {} is ({})",
                            fk.ref_columns.join(", "),
                            target.name(),
                            target.primary_key().join(", ")
                        ),
                    ))
                }
                Some(_) => {}
            }
        }
        if !table.has_primary_key() {
            keyless.push(Diagnostic::warning(
                "no-primary-key",
                table.name(),
                "table has no primary key and cannot be fragmented",
            ));
        }
    }

    unresolved.into_iter().chain(mismatched).chain(keyless).collect()
}
