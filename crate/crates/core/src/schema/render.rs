use std::fmt::Write;

use super::Schema;
use crate::ident;

/// Render a schema as canonical DDL that [`super::parse_ddl`] reads back
/// into an identical value.
pub fn render_ddl(schema: &Schema) -> String {
    let mut out = String::new();
    for table in schema.tables() {
        let mut lines: Vec<String> = table
            .columns()
            .iter()
            .map(|c| {
                let mut line = format!("  {} {}", ident::sql(&c.name), c.ctype);
                if !c.nullable && !table.is_key_column(&c.name) {
                    line.push_str(" NOT NULL");
                }
                line
            })
            .collect();
        if table.has_primary_key() {
            let cols = join(table.primary_key());
            lines.push(match table.primary_key_name() {
                Some(name) => format!("  CONSTRAINT {} PRIMARY KEY ({cols})", ident::sql(name)),
                None => format!("  PRIMARY KEY ({cols})"),
            });
        }
        for fk in table.foreign_keys() {
            let prefix =
                fk.name.as_deref().map(|n| format!("CONSTRAINT {} ", ident::sql(n))).unwrap_or_default();
            lines.push(format!(
                "  {prefix}FOREIGN KEY ({}) REFERENCES {} ({})",
                join(&fk.columns),
                ident::sql(&fk.ref_table),
                join(&fk.ref_columns)
            ));
        }
        let _ = writeln!(out, "CREATE TABLE {} (\n{}\n);", ident::sql(table.name()), lines.join(",\n"));
    }
    out
}

fn join(names: &[String]) -> String {
    names.iter().map(|n| ident::sql(n)).collect::<Vec<_>>().join(", ")
}
