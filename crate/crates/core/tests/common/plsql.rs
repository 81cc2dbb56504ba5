//! A small reader for the PL/SQL subset the generator writes, and an
//! interpreter for its insert triggers. It knows nothing about the plan's
//! routing rules: placement follows only from what the scripts say.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use chrono::NaiveDate;
use ddbforge_core::codegen::{ScriptBundle, SiteScript, StatementKind};
use ddbforge_core::fragmenter::FragmentationPlan;
use ddbforge_core::simulator::{reconstruct, Placement, RejectReason, Relation, SiteImage};
use ddbforge_core::value::Value;
use rust_decimal::Decimal;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Word(String),
    /// Double-quoted identifier, unescaped.
    Quoted(String),
    Str(String),
    Num(Decimal),
    NewRef(String),
    Punct(&'static str),
}

impl Tok {
    fn name(&self) -> Option<&str> {
        match self {
            Tok::Word(w) => Some(w),
            Tok::Quoted(q) => Some(q),
            _ => None,
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }
}

fn quoted(chars: &[char], mut i: usize, q: char) -> (String, usize) {
    let mut out = String::new();
    loop {
        let c = chars[i];
        if c == q {
            if chars.get(i + 1) == Some(&q) {
                out.push(q);
                i += 2;
                continue;
            }
            return (out, i + 1);
        }
        out.push(c);
        i += 1;
    }
}

pub fn tokenize(text: &str) -> Vec<Tok> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '\'' {
            let (s, next) = quoted(&chars, i + 1, '\'');
            out.push(Tok::Str(s));
            i = next;
        } else if c == '"' {
            let (s, next) = quoted(&chars, i + 1, '"');
            out.push(Tok::Quoted(s));
            i = next;
        } else if c == ':' && chars.get(i + 1) == Some(&'=') {
            out.push(Tok::Punct(":="));
            i += 2;
        } else if c == ':' {
            // :new.COLUMN
            let start = i + 5;
            let (name, next) = if chars[start] == '"' {
                quoted(&chars, start + 1, '"')
            } else {
                let mut j = start;
                while j < chars.len() && (chars[j].is_alphanumeric() || "_$#".contains(chars[j])) {
                    j += 1;
                }
                (chars[start..j].iter().collect(), j)
            };
            out.push(Tok::NewRef(name));
            i = next;
        } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i + 1;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            out.push(Tok::Num(Decimal::from_str(&s).unwrap()));
            i = j;
        } else if c.is_alphabetic() {
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || "_$#".contains(chars[j])) {
                j += 1;
            }
            out.push(Tok::Word(chars[i..j].iter().collect()));
            i = j;
        } else {
            let p = ["(", ")", ",", ";", "=", ">", "*", "@", ".", "/", "+", "<"]
                .into_iter()
                .find(|p| p.starts_with(c))
                .unwrap_or_else(|| panic!("unexpected character {c:?}"));
            out.push(Tok::Punct(p));
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub enum Expr {
    New(String),
    Lit(Value),
}

#[derive(Debug, Clone)]
pub enum Cond {
    InList(String, Vec<Value>),
    Compare(String, &'static str, Decimal),
    NotNull(Vec<String>),
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Assign(String),
    Count { into: String, from: String, filter: Vec<(String, Expr)> },
    Insert { into: String, columns: Vec<String>, values: Vec<Expr> },
    If { arms: Vec<(Cond, Vec<Stmt>)>, otherwise: Vec<Stmt> },
    Raise,
    RaiseApp(i64),
}

#[derive(Debug, Clone)]
pub struct Trigger {
    pub name: String,
    pub table: String,
    pub follows: Option<String>,
    pub body: Vec<Stmt>,
    /// Error code raised by the `WHEN excep` handler.
    pub handler: Option<i64>,
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Tok {
        self.pos += 1;
        self.toks[self.pos - 1].clone()
    }

    fn kw(&mut self, kw: &str) {
        let t = self.next();
        assert!(t.is_kw(kw), "expected {kw}, found {t:?}");
    }

    fn punct(&mut self, p: &str) {
        let t = self.next();
        assert!(matches!(t, Tok::Punct(x) if x == p), "expected {p}, found {t:?}");
    }

    fn name(&mut self) -> String {
        let t = self.next();
        t.name().unwrap_or_else(|| panic!("expected a name, found {t:?}")).to_string()
    }

    fn value(&mut self) -> Value {
        match self.next() {
            Tok::Str(s) => Value::Text(s),
            Tok::Num(n) => Value::Number(n),
            Tok::Word(w) if w == "NULL" => Value::Null,
            Tok::Word(w) if w == "DATE" => match self.next() {
                Tok::Str(s) => Value::Date(NaiveDate::parse_from_str(&s, "%Y-%m-%d").unwrap()),
                t => panic!("bad date literal {t:?}"),
            },
            t => panic!("expected a literal, found {t:?}"),
        }
    }

    fn expr(&mut self) -> Expr {
        match self.peek().clone() {
            Tok::NewRef(c) => {
                self.pos += 1;
                Expr::New(c)
            }
            _ => Expr::Lit(self.value()),
        }
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> T) -> Vec<T> {
        self.punct("(");
        let mut out = vec![item(self)];
        while self.peek() == &Tok::Punct(",") {
            self.pos += 1;
            out.push(item(self));
        }
        self.punct(")");
        out
    }

    fn trigger(&mut self) -> Trigger {
        for kw in ["CREATE", "OR", "REPLACE", "TRIGGER"] {
            self.kw(kw);
        }
        let name = self.name();
        for kw in ["BEFORE", "INSERT", "ON"] {
            self.kw(kw);
        }
        let table = self.name();
        self.kw("FOR");
        self.kw("EACH");
        self.kw("ROW");
        let follows = self.peek().is_kw("FOLLOWS").then(|| {
            self.pos += 1;
            self.name()
        });
        self.kw("DECLARE");
        while !self.peek().is_kw("BEGIN") {
            while self.next() != Tok::Punct(";") {}
        }
        self.kw("BEGIN");
        let body = self.block(&["EXCEPTION", "END"]);
        let mut handler = None;
        if self.peek().is_kw("EXCEPTION") {
            self.pos += 1;
            self.kw("WHEN");
            self.name();
            self.kw("THEN");
            match self.stmt() {
                Stmt::RaiseApp(code) => handler = Some(code),
                s => panic!("unexpected handler {s:?}"),
            }
        }
        self.kw("END");
        self.punct(";");
        Trigger { name, table, follows, body, handler }
    }

    fn block(&mut self, stop: &[&str]) -> Vec<Stmt> {
        let mut out = Vec::new();
        while !stop.iter().any(|s| self.peek().is_kw(s)) {
            out.push(self.stmt());
        }
        out
    }

    fn cond(&mut self) -> Cond {
        let first = self.next();
        match first {
            Tok::NewRef(c) if self.peek().is_kw("IN") => {
                self.pos += 1;
                Cond::InList(c, self.list(|p| p.value()))
            }
            Tok::NewRef(c) => {
                let mut cols = vec![c];
                loop {
                    self.kw("IS");
                    self.kw("NOT");
                    self.kw("NULL");
                    if !self.peek().is_kw("AND") {
                        break;
                    }
                    self.pos += 1;
                    match self.next() {
                        Tok::NewRef(c) => cols.push(c),
                        t => panic!("unexpected {t:?}"),
                    }
                }
                Cond::NotNull(cols)
            }
            Tok::Word(var) => {
                let op = match self.next() {
                    Tok::Punct(p @ (">" | "=")) => p,
                    t => panic!("unexpected operator {t:?}"),
                };
                let Tok::Num(n) = self.next() else { panic!("expected a number") };
                Cond::Compare(var, op, n)
            }
            t => panic!("unexpected condition start {t:?}"),
        }
    }

    fn stmt(&mut self) -> Stmt {
        let t = self.next();
        let s = match &t {
            Tok::Word(w) if w == "IF" => {
                let mut arms = Vec::new();
                let mut otherwise = Vec::new();
                let c = self.cond();
                self.kw("THEN");
                arms.push((c, self.block(&["ELSIF", "ELSE", "END"])));
                loop {
                    if self.peek().is_kw("ELSIF") {
                        self.pos += 1;
                        let c = self.cond();
                        self.kw("THEN");
                        arms.push((c, self.block(&["ELSIF", "ELSE", "END"])));
                    } else if self.peek().is_kw("ELSE") {
                        self.pos += 1;
                        otherwise = self.block(&["END"]);
                    } else {
                        break;
                    }
                }
                self.kw("END");
                self.kw("IF");
                Stmt::If { arms, otherwise }
            }
            Tok::Word(w) if w == "SELECT" => {
                self.kw("COUNT");
                self.punct("(");
                self.punct("*");
                self.punct(")");
                self.kw("INTO");
                let into = self.name();
                self.kw("FROM");
                let from = self.name();
                self.kw("WHERE");
                let mut filter = Vec::new();
                loop {
                    let col = self.name();
                    self.punct("=");
                    filter.push((col, self.expr()));
                    if !self.peek().is_kw("AND") {
                        break;
                    }
                    self.pos += 1;
                }
                Stmt::Count { into, from, filter }
            }
            Tok::Word(w) if w == "INSERT" => {
                self.kw("INTO");
                let into = self.name();
                let columns = self.list(|p| p.name());
                self.kw("VALUES");
                let values = self.list(|p| p.expr());
                Stmt::Insert { into, columns, values }
            }
            Tok::Word(w) if w == "RAISE" => {
                self.name();
                Stmt::Raise
            }
            Tok::Word(w) if w == "raise_application_error" => {
                self.punct("(");
                let Tok::Num(code) = self.next() else { panic!("expected an error code") };
                self.punct(",");
                self.value();
                self.punct(")");
                Stmt::RaiseApp(code.try_into().unwrap())
            }
            Tok::Word(var) => {
                self.punct(":=");
                self.value();
                Stmt::Assign(var.clone())
            }
            t => panic!("unexpected statement start {t:?}"),
        };
        self.punct(";");
        s
    }
}

pub fn parse_trigger(text: &str) -> Trigger {
    let mut p = Parser { toks: tokenize(text), pos: 0 };
    p.trigger()
}

/// What an object name means at one site.
#[derive(Debug, Clone)]
enum Object {
    /// A stored fragment: a local table, or a synonym for a remote one.
    Fragment(String),
    /// The view rebuilding a whole table.
    Rebuilt(String),
    /// A local replica of another fragment.
    Replica(String),
}

pub struct Walker<'a> {
    plan: &'a FragmentationPlan,
    objects: BTreeMap<String, Object>,
    triggers: BTreeMap<String, Vec<Trigger>>,
    /// Fragment id to the site whose script creates its table.
    homes: BTreeMap<String, String>,
    /// Fragment id to (site, replica name) of views copying it.
    replicas: BTreeMap<String, Vec<(String, String)>>,
}

fn body_of(text: &str) -> &str {
    text.split_once("-----\n").and_then(|(_, rest)| rest.split_once("-----\n")).map(|(_, b)| b).unwrap()
}

/// `SELECT cols FROM X` view query, if that is all the view is.
fn plain_source(view_text: &str) -> Option<String> {
    let toks = tokenize(body_of(view_text));
    let from = toks.iter().position(|t| t.is_kw("FROM"))?;
    let rest = &toks[from + 1..];
    (rest.len() == 2 && rest[1] == Tok::Punct(";")).then(|| rest[0].name().unwrap().to_string())
}

impl<'a> Walker<'a> {
    pub fn new(plan: &'a FragmentationPlan, bundle: &ScriptBundle, site: &str) -> Self {
        let mut homes = BTreeMap::new();
        let mut replicas: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        for script in &bundle.scripts {
            for s in script.statements_of(StatementKind::Table) {
                homes.insert(s.object_name.clone(), script.site.clone());
            }
        }
        for script in &bundle.scripts {
            for s in script.statements_of(StatementKind::Mview) {
                if let Some(src) = plain_source(&s.text).filter(|src| homes.contains_key(src)) {
                    if plan.schema.table(&s.object_name).is_none() {
                        replicas.entry(src).or_default().push((script.site.clone(), s.object_name.clone()));
                    }
                }
            }
        }
        let script = bundle.script(site).unwrap();
        let mut objects = BTreeMap::new();
        let mut triggers: BTreeMap<String, Vec<Trigger>> = BTreeMap::new();
        for s in &script.statements {
            match s.kind {
                StatementKind::Table | StatementKind::Synonym => {
                    objects.insert(s.object_name.clone(), Object::Fragment(s.object_name.clone()));
                }
                StatementKind::Mview => {
                    let object = if plan.schema.table(&s.object_name).is_some() {
                        Object::Rebuilt(s.object_name.clone())
                    } else {
                        Object::Replica(s.object_name.clone())
                    };
                    objects.insert(s.object_name.clone(), object);
                }
                StatementKind::Trigger => {
                    let t = parse_trigger(body_of(&s.text));
                    triggers.entry(t.table.clone()).or_default().push(t);
                }
                _ => {}
            }
        }
        Self { plan, objects, triggers, homes, replicas }
    }

    /// Triggers on `table` in firing order: those named in a FOLLOWS clause
    /// run before the trigger naming them.
    fn firing_order(&self, table: &str) -> Vec<&Trigger> {
        let all = self.triggers.get(table).map(Vec::as_slice).unwrap_or_default();
        let mut out: Vec<&Trigger> = Vec::new();
        while out.len() < all.len() {
            let next = all
                .iter()
                .find(|t| {
                    !out.iter().any(|o| o.name == t.name)
                        && t.follows.as_ref().is_none_or(|f| out.iter().any(|o| &o.name == f))
                })
                .expect("FOLLOWS chain resolves");
            out.push(next);
        }
        out
    }

    /// Run the insert triggers of `table` for `row` against `image`.
    pub fn insert(
        &self,
        image: &SiteImage,
        table: &str,
        row: &[Value],
    ) -> Result<Vec<Placement>, RejectReason> {
        let t = self.plan.schema.table(table).unwrap();
        // Column constraints of the view itself.
        if row.len() != t.columns().len()
            || t.columns().iter().zip(row).any(|(c, v)| !c.nullable && v.is_null())
        {
            return Err(RejectReason::Malformed);
        }
        let new: BTreeMap<&str, &Value> = t.columns().iter().map(|c| c.name.as_str()).zip(row).collect();
        let mut run =
            Run { walker: self, image, new, vars: BTreeMap::new(), placements: Vec::new(), rebuilt: None };
        for trigger in self.firing_order(table) {
            if let Err(code) = run.block(&trigger.body) {
                let code = if code == 0 { trigger.handler.expect("RAISE needs a handler") } else { code };
                return Err(match code {
                    -20009 => RejectReason::DuplicatePk,
                    -20010 => RejectReason::Unroutable,
                    -20011 => RejectReason::FkViolation,
                    other => panic!("unknown error code {other}"),
                });
            }
        }
        let mut placements = run.placements;
        placements.sort();
        Ok(placements)
    }
}

struct Run<'w, 'a> {
    walker: &'w Walker<'a>,
    image: &'w SiteImage,
    new: BTreeMap<&'w str, &'w Value>,
    vars: BTreeMap<String, Decimal>,
    placements: Vec<Placement>,
    rebuilt: Option<ddbforge_core::simulator::Dataset>,
}

impl Run<'_, '_> {
    fn eval(&self, e: &Expr) -> Value {
        match e {
            Expr::New(c) => self.new[c.as_str()].clone(),
            Expr::Lit(v) => v.clone(),
        }
    }

    fn relation(&mut self, name: &str) -> Relation {
        match self.walker.objects.get(name).unwrap_or_else(|| panic!("{name} is not defined at this site")) {
            Object::Fragment(id) | Object::Replica(id) => self.image.fragment(id).unwrap().clone(),
            Object::Rebuilt(table) => {
                let rebuilt = self.rebuilt.get_or_insert_with(|| {
                    reconstruct(self.image, self.walker.plan).expect("image rebuilds")
                });
                rebuilt.relation(table).unwrap().clone()
            }
        }
    }

    /// `Err(0)` for a bare RAISE, `Err(code)` for an application error.
    fn block(&mut self, stmts: &[Stmt]) -> Result<(), i64> {
        for s in stmts {
            match s {
                Stmt::Assign(var) => {
                    self.vars.insert(var.clone(), Decimal::ZERO);
                }
                Stmt::Count { into, from, filter } => {
                    let rel = self.relation(from);
                    let wanted: Vec<(usize, Value)> =
                        filter.iter().map(|(c, e)| (rel.column_index(c).unwrap(), self.eval(e))).collect();
                    let n = rel.rows.iter().filter(|r| wanted.iter().all(|(i, v)| r[*i].sql_eq(v))).count();
                    self.vars.insert(into.clone(), Decimal::from(n));
                }
                Stmt::Insert { into, columns, values } => {
                    let Some(Object::Fragment(id)) = self.walker.objects.get(into) else {
                        panic!("insert into {into}, which is not a stored fragment here");
                    };
                    let row: Vec<Value> = values.iter().map(|e| self.eval(e)).collect();
                    let stored = self.image.fragment(id).unwrap();
                    assert_eq!(&stored.columns, columns, "insert column list of {id}");
                    self.placements.push(Placement {
                        site: self.walker.homes[id].clone(),
                        fragment: id.clone(),
                        row: row.clone(),
                    });
                    for (site, replica) in self.walker.replicas.get(id).into_iter().flatten() {
                        self.placements.push(Placement {
                            site: site.clone(),
                            fragment: replica.clone(),
                            row: row.clone(),
                        });
                    }
                }
                Stmt::If { arms, otherwise } => {
                    let taken = arms.iter().find(|(c, _)| self.holds(c)).map(|(_, b)| b).unwrap_or(otherwise);
                    self.block(taken)?;
                }
                Stmt::Raise => return Err(0),
                Stmt::RaiseApp(code) => return Err(*code),
            }
        }
        Ok(())
    }

    fn holds(&self, c: &Cond) -> bool {
        match c {
            Cond::InList(col, values) => {
                let v = self.new[col.as_str()];
                values.iter().any(|x| x.sql_eq(v))
            }
            Cond::Compare(var, op, n) => {
                let v = self.vars[var];
                if *op == ">" {
                    v > *n
                } else {
                    v == *n
                }
            }
            Cond::NotNull(cols) => cols.iter().all(|c| !self.new[c.as_str()].is_null()),
        }
    }
}

/// Names a script uses before (or without) defining them. Definitions are
/// the objects the script creates; `@link` targets must be links created
/// earlier in the same script.
pub fn unresolved_references(script: &SiteScript) -> BTreeSet<String> {
    const BUILTINS: [&str; 2] = ["raise_application_error", "DBMS_MVIEW"];
    let mut defined: BTreeSet<String> = BTreeSet::new();
    let mut missing = BTreeSet::new();
    for s in &script.statements {
        let toks = tokenize(body_of(&s.text));
        let mut uses = Vec::new();
        for (i, t) in toks.iter().enumerate() {
            let Some(name) = t.name() else { continue };
            let prev = |back: usize| i.checked_sub(back).map(|j| &toks[j]);
            let after = |kw: &str| prev(1).is_some_and(|p| p.is_kw(kw));
            let next = toks.get(i + 1);
            let call = next == Some(&Tok::Punct("("))
                && prev(1).is_some_and(|p| *p == Tok::Punct(";") || p.is_kw("BEGIN"))
                && !BUILTINS.contains(&name);
            let source = after("FROM") || after("JOIN") || after("FOLLOWS");
            let insert_target = (after("INTO") || after("ON")) && prev(2).is_some_and(|p| p.is_kw("INSERT"));
            let link = prev(1) == Some(&Tok::Punct("@"));
            if call || link || ((source || insert_target) && next != Some(&Tok::Punct("@"))) {
                uses.push(name.to_string());
            }
        }
        if let Some(pos) = toks.iter().position(|t| t.is_kw("REFRESH")) {
            if let Some(Tok::Str(view)) = toks.get(pos + 2) {
                uses.push(view.clone());
            }
        }
        for u in uses {
            if !defined.contains(&u) && u != s.object_name {
                missing.insert(u);
            }
        }
        if s.kind != StatementKind::AccountStub && s.kind != StatementKind::Comment {
            defined.insert(s.object_name.clone());
        }
    }
    missing
}
