//! Monitor scripts.
//!
//! ```text
//! close Event
//! prop deliver pos 0 10 MergeAction by server target O1 O2
//! prop quiet neg 20 30 MergeAction
//! assert Event(e1) @ 0.5
//! action m7 MergeAction by server @ 3.25 target O1 O2
//! ticks 50
//! ```
//!
//! `assert` and `action` lines are monitor inputs; the same two forms appear
//! in the monitor's event log, which is how the log is replayed.

use super::ontology::{assertion_statement, parse_assertion};
use super::{code_lines, Cursor, IoError, Tok};
use crate::kb::{EntityName, Term};
use crate::monitor::MonitorInput;
use crate::temporal::{ActionPattern, ActionRecord, Polarity, TemporalProposition};

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptItem {
    Close(EntityName),
    Proposition(TemporalProposition),
    Input(MonitorInput),
    Ticks(u64),
}

/// A parsed script, items grouped by kind in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Script {
    pub closed_concepts: Vec<EntityName>,
    pub propositions: Vec<TemporalProposition>,
    pub inputs: Vec<MonitorInput>,
    pub ticks: Option<u64>,
}

pub fn parse_script(text: &str, ns: &str) -> Result<Script, IoError> {
    let mut script = Script::default();
    for (line_no, code) in code_lines(text) {
        match parse_item(code, line_no, ns)? {
            ScriptItem::Close(c) => script.closed_concepts.push(c),
            ScriptItem::Proposition(p) => script.propositions.push(p),
            ScriptItem::Input(i) => script.inputs.push(i),
            ScriptItem::Ticks(n) => {
                if script.ticks.replace(n).is_some() {
                    return Err(IoError::Invalid {
                        line: line_no,
                        message: "`ticks` given twice".into(),
                    });
                }
            }
        }
    }
    Ok(script)
}

/// Parses one script line.
pub fn parse_item(code: &str, line_no: usize, ns: &str) -> Result<ScriptItem, IoError> {
    let mut cur = Cursor::new(code, line_no)?;
    let (keyword, kw_col) = cur.ident("statement keyword")?;
    let item = match keyword.as_str() {
        "close" => ScriptItem::Close(cur.name(ns, "class name")?.0),
        "ticks" => {
            let (n, col) = cur.number("tick count")?;
            if n < 0.0 || n.fract() != 0.0 {
                return Err(IoError::Invalid {
                    line: line_no,
                    message: format!("column {col}: tick count must be a whole number, got {n}"),
                });
            }
            ScriptItem::Ticks(n as u64)
        }
        "assert" => ScriptItem::Input(MonitorInput::Assertion(parse_assertion(&mut cur, ns)?)),
        "action" => {
            let (action_id, _) = cur.ident("action identifier")?;
            let (action_kind, _) = cur.name(ns, "action kind")?;
            cur.keyword("by")?;
            let (actor, _) = cur.name("", "actor")?;
            cur.expect(Tok::At, "`@`")?;
            let (occurred_at, _) = cur.number("time")?;
            let target = target(&mut cur)?;
            ScriptItem::Input(MonitorInput::Action(ActionRecord {
                action_id,
                actor,
                action_kind,
                occurred_at,
                target,
            }))
        }
        "prop" => {
            let (prop_id, _) = cur.ident("proposition identifier")?;
            let polarity = match cur.ident("`pos` or `neg`")? {
                (p, _) if p == "pos" => Polarity::TEPos,
                (p, _) if p == "neg" => Polarity::TENeg,
                (p, col) => {
                    return Err(super::ParseError {
                        line: line_no,
                        column: col,
                        expected: vec!["`pos`".into(), "`neg`".into()],
                        found: format!("`{p}`"),
                        opened_at: None,
                    }
                    .into())
                }
            };
            let (start, _) = cur.number("interval start")?;
            let (end, _) = cur.number("interval end")?;
            let (action_kind, _) = cur.name(ns, "action kind")?;
            let mut pattern = ActionPattern::kind(action_kind);
            if matches!(&cur.peek().tok, Tok::Ident(k) if k == "by") {
                cur.bump();
                pattern.actor = Term::Individual(cur.name("", "actor")?.0);
            }
            pattern.target = target(&mut cur)?;
            let prop = TemporalProposition::new(prop_id, polarity, start, end, pattern)
                .map_err(|e| IoError::Invalid {
                    line: line_no,
                    message: e.to_string(),
                })?;
            ScriptItem::Proposition(prop)
        }
        other => {
            return Err(super::ParseError {
                line: line_no,
                column: kw_col,
                expected: ["close", "prop", "assert", "action", "ticks"]
                    .iter()
                    .map(|s| format!("`{s}`"))
                    .collect(),
                found: format!("`{other}`"),
                opened_at: None,
            }
            .into())
        }
    };
    cur.expect_end()?;
    Ok(item)
}

fn target(cur: &mut Cursor) -> Result<Option<(String, String)>, IoError> {
    if !matches!(&cur.peek().tok, Tok::Ident(k) if k == "target") {
        return Ok(None);
    }
    cur.bump();
    let (local, _) = cur.ident("local ontology")?;
    let (external, _) = cur.ident("external ontology")?;
    Ok(Some((local, external)))
}

fn relative(name: &EntityName, ns: &str) -> String {
    if name.namespace() == ns {
        name.local().to_string()
    } else {
        name.to_string()
    }
}

/// `action <id> <Kind> by <actor> @ <t> [target <A> <B>]`.
pub fn format_action(action: &ActionRecord, ns: &str) -> String {
    let mut line = format!(
        "action {} {} by {} @ {}",
        action.action_id,
        relative(&action.action_kind, ns),
        action.actor,
        action.occurred_at
    );
    if let Some((a, b)) = &action.target {
        line.push_str(&format!(" target {a} {b}"));
    }
    line
}

/// The script line for a monitor input.
pub fn format_input(input: &MonitorInput, ns: &str) -> String {
    match input {
        MonitorInput::Assertion(a) => assertion_statement(a, ns),
        MonitorInput::Action(a) => format_action(a, ns),
    }
}
