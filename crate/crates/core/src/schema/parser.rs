//! Parser for the accepted `CREATE TABLE` subset of Oracle DDL.

use std::fmt;

use thiserror::Error;

use super::{Column, ColumnType, ForeignKey, Schema, Table, TableError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected {expected}, found {found}")]
    Syntax { expected: String, found: String },
    #[error("unsupported statement starting with {0}")]
    UnsupportedStatement(String),
    #[error("duplicate table {0}")]
    DuplicateTable(String),
    #[error("duplicate column {column} in table {table}")]
    DuplicateColumn { table: String, column: String },
    #[error("unknown type {0}")]
    UnknownType(String),
    #[error("{0}")]
    InvalidTable(TableError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{position}: {kind}")]
pub struct ParseError {
    pub position: Position,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Quoted(String),
    Int(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Quoted(w) => write!(f, "`\"{w}\"`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Position)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Position { line, column: col };
        if c.is_whitespace() {
            bump!();
        } else if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(ParseError {
                        position: pos,
                        kind: ParseErrorKind::Syntax {
                            expected: "`*/`".into(),
                            found: "end of input".into(),
                        },
                    });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
        } else if c == '"' {
            bump!();
            let mut text = String::new();
            loop {
                match chars.get(i) {
                    None => {
                        return Err(ParseError {
                            position: pos,
                            kind: ParseErrorKind::Syntax {
                                expected: "closing `\"`".into(),
                                found: "end of input".into(),
                            },
                        })
                    }
                    Some('"') if chars.get(i + 1) == Some(&'"') => {
                        text.push('"');
                        bump!();
                        bump!();
                    }
                    Some('"') => {
                        bump!();
                        break;
                    }
                    Some(&ch) => {
                        text.push(ch);
                        bump!();
                    }
                }
            }
            if text.is_empty() {
                return Err(ParseError {
                    position: pos,
                    kind: ParseErrorKind::Syntax { expected: "identifier".into(), found: "`\"\"`".into() },
                });
            }
            out.push((Tok::Quoted(text), pos));
        } else if c.is_ascii_digit() {
            let mut text = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                text.push(chars[i]);
                bump!();
            }
            out.push((Tok::Int(text), pos));
        } else if c.is_alphabetic() || c == '_' {
            let mut text = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || matches!(chars[i], '_' | '$' | '#')) {
                text.push(chars[i]);
                bump!();
            }
            out.push((Tok::Word(text.to_uppercase()), pos));
        } else {
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                other => {
                    return Err(ParseError {
                        position: pos,
                        kind: ParseErrorKind::Syntax {
                            expected: "token".into(),
                            found: format!("`{other}`"),
                        },
                    })
                }
            };
            bump!();
            out.push((tok, pos));
        }
    }
    out.push((Tok::Eof, Position { line, column: col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Position)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Position {
        self.toks[self.at].1
    }

    fn advance(&mut self) -> (Tok, Position) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err(&self, expected: &str) -> ParseError {
        ParseError {
            position: self.pos(),
            kind: ParseErrorKind::Syntax { expected: expected.to_string(), found: self.peek().to_string() },
        }
    }

    fn is_word(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w == kw)
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.is_word(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            Err(self.err(&format!("`{kw}`")))
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.err(&tok.to_string()))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Word(w) => {
                self.advance();
                Ok(w)
            }
            Tok::Quoted(q) => {
                self.advance();
                Ok(q)
            }
            _ => Err(self.err("identifier")),
        }
    }

    fn ident_list(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut names = vec![self.ident()?];
        while *self.peek() == Tok::Comma {
            self.advance();
            names.push(self.ident()?);
        }
        self.expect(Tok::RParen)?;
        Ok(names)
    }

    fn column_type(&mut self) -> Result<ColumnType, ParseError> {
        let pos = self.pos();
        let word = match self.peek().clone() {
            Tok::Word(w) => w,
            _ => return Err(self.err("column type")),
        };
        self.advance();
        match word.as_str() {
            "NUMBER" => Ok(ColumnType::Number),
            "DATE" => Ok(ColumnType::Date),
            "VARCHAR2" => {
                self.expect(Tok::LParen)?;
                let len_pos = self.pos();
                let length = match self.advance().0 {
                    Tok::Int(n) => n.parse::<u32>().ok().filter(|n| *n >= 1),
                    _ => None,
                };
                let Some(length) = length else {
                    return Err(ParseError {
                        position: len_pos,
                        kind: ParseErrorKind::Syntax {
                            expected: "positive length".into(),
                            found: self.toks[self.at - 1].0.to_string(),
                        },
                    });
                };
                let char_semantics = if self.eat_word("CHAR") {
                    true
                } else {
                    self.eat_word("BYTE");
                    false
                };
                self.expect(Tok::RParen)?;
                Ok(ColumnType::Varchar { length, char_semantics })
            }
            _ => Err(ParseError { position: pos, kind: ParseErrorKind::UnknownType(word) }),
        }
    }

    fn create_table(&mut self) -> Result<(Table, Position), ParseError> {
        let start = self.pos();
        match self.peek().clone() {
            Tok::Word(w) if w == "CREATE" => {
                self.advance();
                if !self.is_word("TABLE") {
                    let found = match self.peek() {
                        Tok::Word(w) => format!("CREATE {w}"),
                        _ => "CREATE".to_string(),
                    };
                    return Err(ParseError {
                        position: start,
                        kind: ParseErrorKind::UnsupportedStatement(found),
                    });
                }
                self.advance();
            }
            Tok::Word(w) => {
                return Err(ParseError { position: start, kind: ParseErrorKind::UnsupportedStatement(w) });
            }
            _ => return Err(self.err("`CREATE TABLE`")),
        }

        let name = self.ident()?;
        self.expect(Tok::LParen)?;

        let mut columns: Vec<Column> = Vec::new();
        let mut primary_key: Option<(Vec<String>, Option<String>)> = None;
        let mut foreign_keys = Vec::new();

        loop {
            let elem_pos = self.pos();
            let constraint_name = if self.eat_word("CONSTRAINT") { Some(self.ident()?) } else { None };
            if self.is_word("PRIMARY") {
                self.advance();
                self.expect_word("KEY")?;
                let cols = self.ident_list()?;
                if primary_key.is_some() {
                    return Err(ParseError {
                        position: elem_pos,
                        kind: ParseErrorKind::Syntax {
                            expected: "at most one primary key".into(),
                            found: "a second PRIMARY KEY".into(),
                        },
                    });
                }
                primary_key = Some((cols, constraint_name));
            } else if self.is_word("FOREIGN") {
                self.advance();
                self.expect_word("KEY")?;
                let cols = self.ident_list()?;
                self.expect_word("REFERENCES")?;
                let ref_table = self.ident()?;
                let ref_columns = self.ident_list()?;
                foreign_keys.push(ForeignKey {
                    name: constraint_name,
                    columns: cols,
                    ref_table,
                    ref_columns,
                });
            } else if constraint_name.is_some() {
                return Err(self.err("`PRIMARY KEY` or `FOREIGN KEY`"));
            } else {
                let col_name = self.ident()?;
                let ctype = self.column_type()?;
                let mut column = Column::new(col_name.clone(), ctype);
                loop {
                    if self.eat_word("NOT") {
                        self.expect_word("NULL")?;
                        column.nullable = false;
                    } else if self.eat_word("NULL") {
                        column.nullable = true;
                    } else if self.is_word("PRIMARY") || self.is_word("CONSTRAINT") {
                        let inline_pos = self.pos();
                        let inline_name =
                            if self.eat_word("CONSTRAINT") { Some(self.ident()?) } else { None };
                        self.expect_word("PRIMARY")?;
                        self.expect_word("KEY")?;
                        if primary_key.is_some() {
                            return Err(ParseError {
                                position: inline_pos,
                                kind: ParseErrorKind::Syntax {
                                    expected: "at most one primary key".into(),
                                    found: "a second PRIMARY KEY".into(),
                                },
                            });
                        }
                        primary_key = Some((vec![col_name.clone()], inline_name));
                    } else {
                        break;
                    }
                }
                if columns.iter().any(|c| c.name == column.name) {
                    return Err(ParseError {
                        position: elem_pos,
                        kind: ParseErrorKind::DuplicateColumn { table: name, column: column.name },
                    });
                }
                columns.push(column);
            }

            match self.peek() {
                Tok::Comma => {
                    self.advance();
                }
                Tok::RParen => {
                    self.advance();
                    break;
                }
                _ => return Err(self.err("`,` or `)`")),
            }
        }
        self.expect(Tok::Semi)?;

        let (pk, pk_name) = primary_key.unwrap_or_default();
        let table = Table::new(name, columns, pk, pk_name, foreign_keys)
            .map_err(|e| ParseError { position: start, kind: ParseErrorKind::InvalidTable(e) })?;
        Ok((table, start))
    }
}

/// Parse a script of `CREATE TABLE` statements into a [`Schema`].
pub fn parse_ddl(src: &str) -> Result<Schema, ParseError> {
    let mut parser = Parser { toks: lex(src)?, at: 0 };
    let mut tables: Vec<Table> = Vec::new();
    while *parser.peek() != Tok::Eof {
        let (table, pos) = parser.create_table()?;
        if tables.iter().any(|t| t.name() == table.name()) {
            return Err(ParseError {
                position: pos,
                kind: ParseErrorKind::DuplicateTable(table.name().to_string()),
            });
        }
        tables.push(table);
    }
    Ok(Schema::from_tables(tables).expect("duplicates rejected above"))
}
