//! Typed cell values.
//!
//! Values carry their own type tag; equality used by predicates
//! ([`Value::sql_eq`]) is type-strict and never matches `NULL`. The derived
//! `Eq`/`Ord` implementations are structural and are what multiset
//! comparisons use.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::ident;
use crate::schema::ColumnType;

/// Serialized self-describing (`{"number": "1.5"}`, `{"text": "FST"}`,
/// `{"date": "2014-03-01"}`, `"null"`) so plan documents need no schema to
/// be read back.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Null,
    Number(Decimal),
    Text(String),
    Date(NaiveDate),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("expected a number, found {0}")]
    NotANumber(String),
    #[error("expected a string, found {0}")]
    NotAString(String),
    #[error("expected an ISO-8601 date (YYYY-MM-DD), found {0}")]
    NotADate(String),
    #[error("value {value} exceeds VARCHAR2({length})")]
    TooLong { value: String, length: u32 },
    #[error("NULL is not allowed here")]
    UnexpectedNull,
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// SQL equality: false whenever either side is `NULL` or the types differ.
    pub fn sql_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Number(a), Value::Number(b)) => a == b,
            (Value::Text(a), Value::Text(b)) => a == b,
            (Value::Date(a), Value::Date(b)) => a == b,
            _ => false,
        }
    }

    pub fn number(n: i64) -> Self {
        Value::Number(Decimal::from(n))
    }

    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    /// Read a JSON scalar as a value of column type `ctype`. `null` maps to
    /// [`Value::Null`]; nullability is the caller's concern.
    pub fn from_json(json: &Json, ctype: &ColumnType) -> Result<Self, ValueError> {
        if json.is_null() {
            return Ok(Value::Null);
        }
        match ctype {
            ColumnType::Number => match json {
                Json::Number(n) => Decimal::from_str(&n.to_string())
                    .or_else(|_| Decimal::from_scientific(&n.to_string()))
                    .map(Value::Number)
                    .map_err(|_| ValueError::NotANumber(json.to_string())),
                other => Err(ValueError::NotANumber(other.to_string())),
            },
            ColumnType::Varchar { length, char_semantics } => match json {
                Json::String(s) => {
                    let size = if *char_semantics { s.chars().count() } else { s.len() };
                    if size > *length as usize {
                        Err(ValueError::TooLong { value: s.clone(), length: *length })
                    } else {
                        Ok(Value::Text(s.clone()))
                    }
                }
                other => Err(ValueError::NotAString(other.to_string())),
            },
            ColumnType::Date => match json {
                Json::String(s) => NaiveDate::parse_from_str(s, "%Y-%m-%d")
                    .map(Value::Date)
                    .map_err(|_| ValueError::NotADate(s.clone())),
                other => Err(ValueError::NotADate(other.to_string())),
            },
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Value::Null => Json::Null,
            Value::Number(d) => {
                let text = d.normalize().to_string();
                serde_json::Number::from_str(&text).map(Json::Number).unwrap_or(Json::String(text))
            }
            Value::Text(s) => Json::String(s.clone()),
            Value::Date(d) => Json::String(d.format("%Y-%m-%d").to_string()),
        }
    }

    /// SQL literal form, as written into generated scripts.
    pub fn sql_literal(&self) -> String {
        match self {
            Value::Null => "NULL".to_string(),
            Value::Number(d) => d.normalize().to_string(),
            Value::Text(s) => ident::literal(s),
            Value::Date(d) => format!("DATE '{}'", d.format("%Y-%m-%d")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Number(d) => write!(f, "{}", d.normalize()),
            Value::Text(s) => write!(f, "'{s}'"),
            Value::Date(d) => write!(f, "DATE '{}'", d.format("%Y-%m-%d")),
        }
    }
}
