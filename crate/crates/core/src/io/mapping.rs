//! Mapping documents and conjunctive queries.
//!
//! ```text
//! map m1: O1:Event(x) <- O2:Event(x) ; P(0,8)
//! O1: keyword(x, y) ← O2: about(x, y) ; P(0.9)
//! ```
//!
//! The `map id:` prefix is optional; unnamed mappings are numbered `m1`,
//! `m2`, ... by position. A second `; P(..)` clause gives the probability
//! that a non-member of the source belongs to the target. Predicates must
//! be prefixed; bare lowercase arguments are variables.

use super::{code_lines, Cursor, IoError, TermMode, Tok};
use crate::kb::Atom;
use crate::merge::Mapping;

pub fn parse_mappings(text: &str) -> Result<Vec<Mapping>, IoError> {
    let mut out = Vec::new();
    for (line_no, code) in code_lines(text) {
        let mut cur = Cursor::new(code, line_no)?;
        let named = matches!(&cur.peek().tok, Tok::Ident(k) if k == "map")
            && matches!(cur.peek_at(1), Tok::Ident(_))
            && cur.peek_at(2) == &Tok::Colon;
        let mapping_id = if named {
            cur.bump();
            let (id, _) = cur.ident("mapping identifier")?;
            cur.bump();
            id
        } else {
            format!("m{}", out.len() + 1)
        };
        let target = qualified_atom(&mut cur)?;
        cur.expect(Tok::LeftArrow, "`<-`")?;
        let source = qualified_atom(&mut cur)?;
        let probability = probability_clause(&mut cur)?;
        let absent_probability = if cur.peek().tok == Tok::Semi {
            Some(probability_clause(&mut cur)?)
        } else {
            None
        };
        cur.expect_end()?;
        let mapping = Mapping {
            mapping_id,
            source,
            target,
            probability,
            absent_probability,
        };
        mapping
            .validate()
            .map_err(|source| IoError::Merge { line: line_no, source })?;
        out.push(mapping);
    }
    Ok(out)
}

fn qualified_atom(cur: &mut Cursor) -> Result<Atom, IoError> {
    let (atom, col) = cur.atom("", TermMode::Pattern)?;
    let name = atom.predicate().name().clone();
    if name.namespace().is_empty() {
        return Err(IoError::UnresolvedName {
            name: name.to_string(),
            line: cur.line,
            column: col,
        });
    }
    Ok(atom)
}

/// `; P(<decimal>)`, with the head letter in any case.
fn probability_clause(cur: &mut Cursor) -> Result<f64, IoError> {
    cur.expect(Tok::Semi, "`;`")?;
    let (head, _) = cur.ident("`P`")?;
    if !head.eq_ignore_ascii_case("p") && !head.eq_ignore_ascii_case("pabsent") {
        return Err(IoError::Invalid {
            line: cur.line,
            message: format!("expected `P(...)`, found `{head}`"),
        });
    }
    cur.expect(Tok::LParen, "`(`")?;
    let (value, column) = cur.number("probability")?;
    cur.expect(Tok::RParen, "`)`")?;
    if !(0.0..=1.0).contains(&value) {
        return Err(IoError::ProbabilityOutOfRange {
            value,
            line: cur.line,
            column,
        });
    }
    Ok(value)
}

/// Parses `A1 ∧ A2 ∧ ...` (also `^`, `&` or top-level commas). Unprefixed
/// predicates fall into `default_ns`.
pub fn parse_query(text: &str, default_ns: &str) -> Result<Vec<Atom>, IoError> {
    let mut cur = Cursor::new(text.trim_end_matches(['\n', '\r']), 1)?;
    let mut atoms = Vec::new();
    loop {
        atoms.push(cur.atom(default_ns, TermMode::Pattern)?.0);
        if cur.at_end() {
            return Ok(atoms);
        }
        if !cur.eat(&Tok::And) && !cur.eat(&Tok::Comma) {
            return Err(cur.error(&["`∧`", "end of query"]).into());
        }
    }
}
