//! Line-based text formats: ontologies, mappings and queries, MFrag
//! definitions, monitor scripts, simulation configs and result records.
//!
//! All formats share one tokenizer. `#` starts a comment that runs to the end
//! of the line. Error columns are 1-based byte offsets.

mod config;
mod fragment;
mod mapping;
mod ontology;
mod script;

use std::fmt;

use thiserror::Error;

use crate::kb::{Atom, EntityName, KbError, Term};
use crate::merge::MergeError;

pub use config::{
    format_sig, parse_config, parse_sweep, ResultRecord, SweepGrid, CSV_COLUMNS,
};
pub use fragment::parse_fragments;
pub use mapping::{parse_mappings, parse_query};
pub use ontology::{parse_ontology, serialize_ontology};
pub use script::{format_action, format_input, parse_item, parse_script, Script, ScriptItem};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
    /// Column of an opening delimiter that was never closed.
    pub opened_at: Option<usize>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: expected {}, found {}",
            self.line,
            self.column,
            self.expected.join(" or "),
            self.found
        )?;
        if let Some(col) = self.opened_at {
            write!(f, " (unclosed '(' at column {col})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("parse error: {0}")]
    Parse(ParseError),
    #[error("line {line}, column {column}: unresolved name {name}")]
    UnresolvedName {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("line {line}, column {column}: probability {value} outside [0, 1]")]
    ProbabilityOutOfRange {
        value: f64,
        line: usize,
        column: usize,
    },
    #[error("line {line}: {source}")]
    Kb { line: usize, source: KbError },
    #[error("line {line}: {source}")]
    Merge { line: usize, source: MergeError },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

impl From<ParseError> for IoError {
    fn from(e: ParseError) -> Self {
        IoError::Parse(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Var(String),
    Num(f64),
    Colon,
    LParen,
    RParen,
    Comma,
    Arrow,
    LeftArrow,
    Eq,
    Pipe,
    Semi,
    At,
    And,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Var(s) => format!("`?{s}`"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Colon => "`:`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::LeftArrow => "`<-`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Semi => "`;`".into(),
            Tok::At => "`@`".into(),
            Tok::And => "`∧`".into(),
            Tok::End => "end of line".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub col: usize,
}

/// Strips a trailing `#` comment.
pub(crate) fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(code, _)| code)
}

fn lex(line: &str, line_no: usize) -> Result<Vec<Token>, ParseError> {
    let bytes = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let is_ident_start = |c: u8| c.is_ascii_alphabetic() || c == b'_';
    let is_ident = |c: u8| c.is_ascii_alphanumeric() || c == b'_';
    while i < bytes.len() {
        let c = bytes[i];
        let col = i + 1;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let rest = &line[i..];
        let (tok, len) = if is_ident_start(c) {
            let len = rest.bytes().take_while(|b| is_ident(*b)).count();
            (Tok::Ident(rest[..len].to_string()), len)
        } else if c == b'?' && rest.len() > 1 && is_ident_start(bytes[i + 1]) {
            let len = 1 + rest[1..].bytes().take_while(|b| is_ident(*b)).count();
            (Tok::Var(rest[1..len].to_string()), len)
        } else if c.is_ascii_digit() || (c == b'-' && rest.len() > 1 && bytes[i + 1].is_ascii_digit()) {
            let mut len = 1 + rest[1..].bytes().take_while(u8::is_ascii_digit).count();
            let rb = rest.as_bytes();
            if rb.get(len).is_some_and(|b| *b == b'.' || *b == b',')
                && rb.get(len + 1).is_some_and(u8::is_ascii_digit)
            {
                len += 1 + rest[len + 1..].bytes().take_while(u8::is_ascii_digit).count();
            }
            let text = rest[..len].replace(',', ".");
            let value = text.parse::<f64>().map_err(|_| ParseError {
                line: line_no,
                column: col,
                expected: vec!["number".into()],
                found: format!("`{}`", &rest[..len]),
                opened_at: None,
            })?;
            (Tok::Num(value), len)
        } else if rest.starts_with("->") {
            (Tok::Arrow, 2)
        } else if rest.starts_with("<-") {
            (Tok::LeftArrow, 2)
        } else if rest.starts_with('→') {
            (Tok::Arrow, '→'.len_utf8())
        } else if rest.starts_with('←') {
            (Tok::LeftArrow, '←'.len_utf8())
        } else if rest.starts_with('∧') {
            (Tok::And, '∧'.len_utf8())
        } else {
            let tok = match c {
                b':' => Tok::Colon,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b',' => Tok::Comma,
                b'=' => Tok::Eq,
                b'|' => Tok::Pipe,
                b';' => Tok::Semi,
                b'@' => Tok::At,
                b'^' | b'&' => Tok::And,
                _ => {
                    let ch = rest.chars().next().unwrap_or('?');
                    return Err(ParseError {
                        line: line_no,
                        column: col,
                        expected: vec!["token".into()],
                        found: format!("`{ch}`"),
                        opened_at: None,
                    });
                }
            };
            (tok, 1)
        };
        out.push(Token { tok, col });
        i += len;
    }
    out.push(Token {
        tok: Tok::End,
        col: line.len() + 1,
    });
    Ok(out)
}

/// How bare identifiers in argument position are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TermMode {
    /// Only `?x` is a variable.
    Explicit,
    /// `?x` and lowercase-initial bare names are variables.
    Pattern,
}

pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    pub line: usize,
}

impl Cursor {
    pub fn new(text: &str, line: usize) -> Result<Self, ParseError> {
        Ok(Self {
            toks: lex(text, line)?,
            pos: 0,
            line,
        })
    }

    pub fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    pub fn peek_at(&self, offset: usize) -> &Tok {
        &self.toks[(self.pos + offset).min(self.toks.len() - 1)].tok
    }

    pub fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub fn at_end(&self) -> bool {
        self.peek().tok == Tok::End
    }

    pub fn error(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        ParseError {
            line: self.line,
            column: t.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
            opened_at: None,
        }
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: Tok, desc: &str) -> Result<Token, ParseError> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            Err(self.error(&[desc]))
        }
    }

    pub fn expect_end(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(&["end of line"]))
        }
    }

    pub fn ident(&mut self, desc: &str) -> Result<(String, usize), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                let col = self.bump().col;
                Ok((s, col))
            }
            _ => Err(self.error(&[desc])),
        }
    }

    pub fn keyword(&mut self, word: &str) -> Result<(), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if s == word => {
                self.bump();
                Ok(())
            }
            _ => Err(self.error(&[&format!("`{word}`")])),
        }
    }

    pub fn number(&mut self, desc: &str) -> Result<(f64, usize), ParseError> {
        match self.peek().tok {
            Tok::Num(n) => {
                let col = self.bump().col;
                Ok((n, col))
            }
            _ => Err(self.error(&[desc])),
        }
    }

    /// `local` or `ns:local`. Returns the name and its starting column.
    pub fn name(&mut self, default_ns: &str, desc: &str) -> Result<(EntityName, usize), ParseError> {
        let (first, col) = self.ident(desc)?;
        let (ns, local) = if self.peek().tok == Tok::Colon && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.bump();
            let (local, _) = self.ident("name")?;
            (first, local)
        } else {
            (default_ns.to_string(), first)
        };
        let name = EntityName::new(ns, local).map_err(|_| ParseError {
            line: self.line,
            column: col,
            expected: vec![desc.into()],
            found: "invalid name".into(),
            opened_at: None,
        })?;
        Ok((name, col))
    }

    fn term(&mut self, mode: TermMode) -> Result<Term, ParseError> {
        match self.peek().tok.clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(Term::Variable(v))
            }
            Tok::Ident(s)
                if mode == TermMode::Pattern
                    && s.starts_with(|c: char| c.is_ascii_lowercase())
                    && self.peek_at(1) != &Tok::Colon =>
            {
                self.bump();
                Ok(Term::Variable(s))
            }
            Tok::Ident(_) => Ok(Term::Individual(self.name("", "individual or variable")?.0)),
            _ => Err(self.error(&["individual or variable"])),
        }
    }

    /// `Pred(t)` or `Pred(t1, t2)`. Returns the atom and the column of the
    /// predicate name.
    pub fn atom(&mut self, default_ns: &str, mode: TermMode) -> Result<(Atom, usize), ParseError> {
        let (pred, col) = self.name(default_ns, "predicate name")?;
        let open = self.expect(Tok::LParen, "`(`")?.col;
        let mut terms = vec![self.term(mode)?];
        loop {
            match self.peek().tok {
                Tok::Comma if terms.len() < 2 => {
                    self.bump();
                    terms.push(self.term(mode)?);
                }
                Tok::RParen => {
                    self.bump();
                    break;
                }
                _ => {
                    let expected: &[&str] = if terms.len() < 2 { &["`,`", "`)`"] } else { &["`)`"] };
                    let mut err = self.error(expected);
                    err.opened_at = Some(open);
                    return Err(err);
                }
            }
        }
        let mut terms = terms.into_iter();
        let subject = terms.next().expect("at least one term");
        let atom = match terms.next() {
            None => Atom::Class {
                concept: pred,
                subject,
            },
            Some(object) => Atom::Property {
                property: pred,
                subject,
                object,
            },
        };
        Ok((atom, col))
    }
}

/// Iterates `(line_number, code)` over non-blank lines with comments removed.
pub(crate) fn code_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}
