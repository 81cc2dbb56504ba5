//! Centralized relational schema: tables, columns, keys.
//!
//! Values of these types can only be built through constructors that
//! enforce the per-table invariants. Cross-table properties (foreign key
//! targets) are reported by [`check_schema`] instead, so that a schema with
//! a dangling reference can still be loaded and inspected.

mod check;
mod parser;
mod render;

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use check::check_schema;
pub use parser::{parse_ddl, ParseError, ParseErrorKind, Position};
pub use render::render_ddl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnType {
    Number,
    Varchar {
        length: u32,
        /// `VARCHAR2(n CHAR)` when set, byte semantics otherwise.
        #[serde(default)]
        char_semantics: bool,
    },
    Date,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Number => f.write_str("NUMBER"),
            ColumnType::Varchar { length, char_semantics: true } => write!(f, "VARCHAR2({length} CHAR)"),
            ColumnType::Varchar { length, char_semantics: false } => write!(f, "VARCHAR2({length})"),
            ColumnType::Date => f.write_str("DATE"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub ctype: ColumnType,
    pub nullable: bool,
}

impl Column {
    pub fn new(name: impl Into<String>, ctype: ColumnType) -> Self {
        Self { name: name.into(), ctype, nullable: true }
    }

    pub fn not_null(mut self) -> Self {
        self.nullable = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForeignKey {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub columns: Vec<String>,
    pub ref_table: String,
    pub ref_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("table name is empty")]
    EmptyName,
    #[error("table {table} has no columns")]
    NoColumns { table: String },
    #[error("column name is empty in table {table}")]
    EmptyColumnName { table: String },
    #[error("duplicate column {column} in table {table}")]
    DuplicateColumn { table: String, column: String },
    #[error("primary key of {table} names unknown column {column}")]
    UnknownKeyColumn { table: String, column: String },
    #[error("primary key of {table} lists column {column} twice")]
    RepeatedKeyColumn { table: String, column: String },
    #[error("foreign key of {table} names unknown column {column}")]
    UnknownForeignKeyColumn { table: String, column: String },
    #[error("foreign key of {table} has {local} local columns but {referenced} referenced columns")]
    ForeignKeyArity { table: String, local: usize, referenced: usize },
}

/// A table of the centralized schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct Table {
    name: String,
    columns: Vec<Column>,
    primary_key: Vec<String>,
    primary_key_name: Option<String>,
    foreign_keys: Vec<ForeignKey>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    name: String,
    columns: Vec<Column>,
    #[serde(default)]
    primary_key: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    primary_key_name: Option<String>,
    #[serde(default)]
    foreign_keys: Vec<ForeignKey>,
}

impl TryFrom<RawTable> for Table {
    type Error = TableError;

    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        Table::new(raw.name, raw.columns, raw.primary_key, raw.primary_key_name, raw.foreign_keys)
    }
}

impl From<Table> for RawTable {
    fn from(t: Table) -> Self {
        RawTable {
            name: t.name,
            columns: t.columns,
            primary_key: t.primary_key,
            primary_key_name: t.primary_key_name,
            foreign_keys: t.foreign_keys,
        }
    }
}

impl Table {
    /// Build a table, enforcing column and key invariants.
    ///
    /// Primary key columns are forced non-nullable.
    pub fn new(
        name: impl Into<String>,
        mut columns: Vec<Column>,
        primary_key: Vec<String>,
        primary_key_name: Option<String>,
        foreign_keys: Vec<ForeignKey>,
    ) -> Result<Self, TableError> {
        let name = name.into();
        if name.is_empty() {
            return Err(TableError::EmptyName);
        }
        if columns.is_empty() {
            return Err(TableError::NoColumns { table: name });
        }
        for (i, col) in columns.iter().enumerate() {
            if col.name.is_empty() {
                return Err(TableError::EmptyColumnName { table: name });
            }
            if columns[..i].iter().any(|c| c.name == col.name) {
                return Err(TableError::DuplicateColumn { table: name, column: col.name.clone() });
            }
        }
        for (i, key) in primary_key.iter().enumerate() {
            if primary_key[..i].contains(key) {
                return Err(TableError::RepeatedKeyColumn { table: name, column: key.clone() });
            }
            match columns.iter_mut().find(|c| &c.name == key) {
                Some(col) => col.nullable = false,
                None => return Err(TableError::UnknownKeyColumn { table: name, column: key.clone() }),
            }
        }
        for fk in &foreign_keys {
            if fk.columns.is_empty() || fk.columns.len() != fk.ref_columns.len() {
                return Err(TableError::ForeignKeyArity {
                    table: name,
                    local: fk.columns.len(),
                    referenced: fk.ref_columns.len(),
                });
            }
            if let Some(missing) = fk.columns.iter().find(|c| !columns.iter().any(|col| &col.name == *c)) {
                return Err(TableError::UnknownForeignKeyColumn { table: name, column: missing.clone() });
            }
        }
        Ok(Self { name, columns, primary_key, primary_key_name, foreign_keys })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn primary_key(&self) -> &[String] {
        &self.primary_key
    }

    pub fn primary_key_name(&self) -> Option<&str> {
        self.primary_key_name.as_deref()
    }

    pub fn foreign_keys(&self) -> &[ForeignKey] {
        &self.foreign_keys
    }

    pub fn has_primary_key(&self) -> bool {
        !self.primary_key.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn is_key_column(&self, name: &str) -> bool {
        self.primary_key.iter().any(|k| k == name)
    }

    /// Positions of the primary key columns, in key order.
    pub fn key_indices(&self) -> Vec<usize> {
        self.primary_key.iter().map(|k| self.column_index(k).expect("key column exists")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("duplicate table {0}")]
    DuplicateTable(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// The centralized schema, in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct Schema {
    tables: IndexMap<String, Table>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchema {
    tables: Vec<Table>,
}

impl TryFrom<RawSchema> for Schema {
    type Error = SchemaError;

    fn try_from(raw: RawSchema) -> Result<Self, Self::Error> {
        Schema::from_tables(raw.tables)
    }
}

impl From<Schema> for RawSchema {
    fn from(s: Schema) -> Self {
        RawSchema { tables: s.tables.into_values().collect() }
    }
}

impl Schema {
    pub fn from_tables(tables: impl IntoIterator<Item = Table>) -> Result<Self, SchemaError> {
        let mut map = IndexMap::new();
        for table in tables {
            if map.contains_key(table.name()) {
                return Err(SchemaError::DuplicateTable(table.name().to_string()));
            }
            map.insert(table.name().to_string(), table);
        }
        Ok(Self { tables: map })
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.get(name)
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.values()
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tables.contains_key(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(name: &str) -> Column {
        Column::new(name, ColumnType::Number)
    }

    #[test]
    fn key_columns_become_not_null() {
        let t = Table::new("T", vec![num("A"), num("B")], vec!["A".into()], None, vec![]).unwrap();
        assert!(!t.column("A").unwrap().nullable);
        assert!(t.column("B").unwrap().nullable);
    }

    #[test]
    fn rejects_bad_tables() {
        assert_eq!(
            Table::new("T", vec![num("A"), num("A")], vec![], None, vec![]),
            Err(TableError::DuplicateColumn { table: "T".into(), column: "A".into() })
        );
        assert!(matches!(
            Table::new("T", vec![num("A")], vec!["B".into()], None, vec![]),
            Err(TableError::UnknownKeyColumn { .. })
        ));
        let fk =
            ForeignKey { name: None, columns: vec!["A".into()], ref_table: "P".into(), ref_columns: vec![] };
        assert!(matches!(
            Table::new("T", vec![num("A")], vec![], None, vec![fk]),
            Err(TableError::ForeignKeyArity { .. })
        ));
    }

    #[test]
    fn serde_goes_through_validation() {
        let bad = r#"{"tables":[{"name":"T","columns":[
            {"name":"A","ctype":{"kind":"number"},"nullable":true},
            {"name":"A","ctype":{"kind":"date"},"nullable":true}]}]}"#;
        assert!(serde_json::from_str::<Schema>(bad).is_err());
    }
}
