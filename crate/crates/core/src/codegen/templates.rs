//! Oracle dialect text. Everything the generated scripts say literally is
//! spelled out here; the generator decides what to emit and in which order.

use crate::ident;
use crate::policy::{RefreshMode, RefreshPolicy};
use crate::schema::{Column, ColumnType};
use crate::topology::Site;

pub const PK_VIOLATION: &str = "raise_application_error(-20009, 'constraint violation');";
pub const UNROUTABLE_CODE: i32 = -20010;
pub const FK_VIOLATION_CODE: i32 = -20011;

pub fn banner(label: &str, name: &str) -> String {
    format!("-----\n-- DDL for {label} {name}\n-----\n")
}

pub fn join_names(names: &[String]) -> String {
    names.iter().map(|n| ident::sql(n)).collect::<Vec<_>>().join(", ")
}

pub fn account_stub(site: &Site) -> String {
    let user = ident::sql(&site.credentials.user);
    format!(
        "-- Site {} ({}:{}, service {}).\n\
         -- The schema owner must exist before this script runs, for example:\n\
         -- CREATE USER {user} IDENTIFIED BY <password>;\n\
         -- GRANT CREATE SESSION, CREATE TABLE, CREATE VIEW, CREATE MATERIALIZED VIEW,\n\
         --   CREATE SYNONYM, CREATE TRIGGER, CREATE PROCEDURE, CREATE DATABASE LINK TO {user};\n",
        site.logical_name, site.network_address, site.port, site.service_name
    )
}

/// Connection descriptor of a link to `target`, in the `DESCRIPTION=` form.
pub fn dblink(target: &Site) -> String {
    let descriptor = format!(
        "(DESCRIPTION= (ADDRESS= (PROTOCOL=TCP) (HOST={}) (PORT={})) (CONNECT_DATA= (SERVICE_NAME={})))",
        target.network_address, target.port, target.service_name
    );
    format!(
        "CREATE DATABASE LINK {}\nCONNECT TO \"{}\" IDENTIFIED BY VALUES {}\nUSING {};\n",
        ident::sql(&target.dblink_name),
        target.credentials.user.replace('"', "\"\""),
        ident::literal(&target.credentials.secret),
        ident::literal(&descriptor)
    )
}

pub fn column_type(ctype: &ColumnType) -> String {
    ctype.to_string()
}

/// Parameter type of a PL/SQL procedure argument: the type without length.
pub fn parameter_type(ctype: &ColumnType) -> &'static str {
    match ctype {
        ColumnType::Number => "NUMBER",
        ColumnType::Varchar { .. } => "VARCHAR2",
        ColumnType::Date => "DATE",
    }
}

pub fn create_table(name: &str, columns: &[&Column], key: &[String], constraint: &str) -> String {
    let mut out = format!("CREATE TABLE {} (\n", ident::sql(name));
    for c in columns {
        let not_null = if !c.nullable && !key.contains(&c.name) { " NOT NULL" } else { "" };
        out.push_str(&format!("  {} {}{not_null},\n", ident::sql(&c.name), column_type(&c.ctype)));
    }
    out.push_str(&format!("  CONSTRAINT {} PRIMARY KEY ({})\n);\n", ident::sql(constraint), join_names(key)));
    out
}

pub fn synonym(name: &str, link: &str) -> String {
    format!("CREATE SYNONYM {0} FOR {0}@{1};\n", ident::sql(name), ident::sql(link))
}

pub fn refresh_clause(refresh: &RefreshPolicy) -> String {
    let mode = match refresh.mode {
        RefreshMode::Complete => "complete",
        RefreshMode::Fast => "fast",
    };
    format!("refresh {mode}\nstart with sysdate\nnext sysdate + {}\n", refresh.interval_days)
}

pub fn refresh_default_note(refresh: &RefreshPolicy) -> String {
    format!(
        "-- Refresh schedule not set by the policy; using the default ({}).\n",
        refresh_clause(refresh).lines().collect::<Vec<_>>().join(" ")
    )
}

pub fn materialized_view(name: &str, refresh: &RefreshPolicy, query: &str) -> String {
    format!("create materialized view {}\n{}as\n{query};\n", ident::sql(name), refresh_clause(refresh))
}

pub fn select(columns: &[String], from: &str) -> String {
    format!("SELECT {} FROM {}", join_names(columns), ident::sql(from))
}

/// `(SELECT ...) UNION` branches, one per line.
pub fn union(branches: &[String]) -> String {
    branches.iter().map(|b| format!("({b})")).collect::<Vec<_>>().join(" UNION\n")
}

pub fn new_ref(column: &str) -> String {
    format!(":new.{}", ident::sql(column))
}

pub fn key_match(columns: &[String], values: &[String]) -> String {
    columns
        .iter()
        .zip(values)
        .map(|(c, v)| format!("{} = {v}", ident::sql(c)))
        .collect::<Vec<_>>()
        .join(" AND ")
}

pub fn insert(target: &str, columns: &[String], values: &[String], indent: &str) -> String {
    format!(
        "{indent}INSERT INTO {} ({})\n{indent}VALUES ({});\n",
        ident::sql(target),
        join_names(columns),
        values.join(", ")
    )
}

pub fn raise(code: i32, message: &str) -> String {
    format!("raise_application_error({code}, {});", ident::literal(message))
}

pub fn routing_trigger_name(table: &str) -> String {
    format!("INSERT_{table}")
}

pub fn fk_trigger_name(table: &str) -> String {
    format!("FK_{table}")
}

pub fn procedure_name(prefix: &str, table: &str) -> String {
    format!("{prefix}_{table}")
}

pub fn trigger_header(name: &str, table: &str, follows: Option<&str>) -> String {
    let mut out = format!(
        "CREATE OR REPLACE TRIGGER {}\nBEFORE INSERT ON {}\nFOR EACH ROW\n",
        ident::sql(name),
        ident::sql(table)
    );
    if let Some(f) = follows {
        out.push_str(&format!("FOLLOWS {}\n", ident::sql(f)));
    }
    out
}

pub fn mview_refresh_call(name: &str) -> String {
    format!("DBMS_MVIEW.REFRESH({}, 'C');", ident::literal(name))
}
