//! Ontology documents.
//!
//! ```text
//! namespace O1
//! class Event
//! class Action
//! subclass Action Event
//! disjoint Event Agent
//! union TemporalEntity = Instant | Interval
//! domain keyword Event
//! range keyword Subject
//! allvalues Event keyword Subject
//! assert Event(Trip)
//! assert keyword(Trip, Sea) @ 2.5
//! rule acts: Action(?a), actor(?a, ?g) -> Agent(?g)
//! ```
//!
//! Class and property names without a prefix live in the document
//! namespace; individuals without a prefix are shared across ontologies.
//! Every unprefixed class must be declared with `class` somewhere in the
//! document.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{code_lines, Cursor, IoError, TermMode, Tok};
use crate::kb::{
    ABoxAssertion, Atom, EntityName, HornRule, KbItem, KnowledgeBase, TBoxAxiom, Term,
};

pub fn parse_ontology(text: &str) -> Result<KnowledgeBase, IoError> {
    let mut namespace: Option<String> = None;
    let mut declared = BTreeSet::new();
    let mut items: Vec<(usize, KbItem)> = Vec::new();
    // (name, line, column) of every class reference, resolved at the end.
    let mut references: Vec<(EntityName, usize, usize)> = Vec::new();

    for (line_no, code) in code_lines(text) {
        let mut cur = Cursor::new(code, line_no)?;
        let (keyword, _) = cur.ident("statement keyword")?;
        let ns = namespace.clone().unwrap_or_default();
        let class_ref = |cur: &mut Cursor, refs: &mut Vec<_>| -> Result<EntityName, IoError> {
            let (name, col) = cur.name(&ns, "class name")?;
            refs.push((name.clone(), line_no, col));
            Ok(name)
        };
        match keyword.as_str() {
            "namespace" => {
                if namespace.is_some() || !items.is_empty() || !declared.is_empty() {
                    return Err(IoError::Invalid {
                        line: line_no,
                        message: "namespace must be declared once, before any statement".into(),
                    });
                }
                let (ns, _) = cur.ident("namespace identifier")?;
                namespace = Some(ns);
            }
            "class" => {
                let (name, _) = cur.name(&ns, "class name")?;
                declared.insert(name);
            }
            "subclass" => {
                let sub = class_ref(&mut cur, &mut references)?;
                let sup = class_ref(&mut cur, &mut references)?;
                items.push((line_no, TBoxAxiom::SubClassOf { sub, sup }.into()));
            }
            "disjoint" => {
                let a = class_ref(&mut cur, &mut references)?;
                let b = class_ref(&mut cur, &mut references)?;
                items.push((line_no, TBoxAxiom::DisjointClasses { a, b }.into()));
            }
            "union" => {
                let whole = class_ref(&mut cur, &mut references)?;
                cur.expect(Tok::Eq, "`=`")?;
                let mut parts = vec![class_ref(&mut cur, &mut references)?];
                while cur.eat(&Tok::Pipe) {
                    parts.push(class_ref(&mut cur, &mut references)?);
                }
                items.push((line_no, TBoxAxiom::UnionEquivalence { whole, parts }.into()));
            }
            "domain" | "range" => {
                let (property, _) = cur.name(&ns, "property name")?;
                let class = class_ref(&mut cur, &mut references)?;
                let axiom = if keyword == "domain" {
                    TBoxAxiom::PropertyDomain { property, class }
                } else {
                    TBoxAxiom::PropertyRange { property, class }
                };
                items.push((line_no, axiom.into()));
            }
            "allvalues" => {
                let class = class_ref(&mut cur, &mut references)?;
                let (property, _) = cur.name(&ns, "property name")?;
                let filler = class_ref(&mut cur, &mut references)?;
                items.push((
                    line_no,
                    TBoxAxiom::AllValuesFrom {
                        class,
                        property,
                        filler,
                    }
                    .into(),
                ));
            }
            "assert" => {
                let (atom, col) = cur.atom(&ns, TermMode::Explicit)?;
                note_class(&atom, line_no, col, &mut references);
                let at = if cur.eat(&Tok::At) {
                    cur.number("assertion time")?.0
                } else {
                    0.0
                };
                items.push((line_no, ABoxAssertion::new(atom, at).into()));
            }
            "rule" => {
                let (rule_id, _) = cur.ident("rule identifier")?;
                cur.expect(Tok::Colon, "`:`")?;
                let mut body = Vec::new();
                loop {
                    let (atom, col) = cur.atom(&ns, TermMode::Explicit)?;
                    note_class(&atom, line_no, col, &mut references);
                    body.push(atom);
                    if cur.eat(&Tok::Arrow) {
                        break;
                    }
                    if !cur.eat(&Tok::Comma) {
                        return Err(cur.error(&["`,`", "`->`"]).into());
                    }
                }
                let (head, col) = cur.atom(&ns, TermMode::Explicit)?;
                note_class(&head, line_no, col, &mut references);
                items.push((line_no, HornRule { rule_id, body, head }.into()));
            }
            _ => {
                return Err(super::ParseError {
                    line: line_no,
                    column: code.len() - code.trim_start().len() + 1,
                    expected: [
                        "namespace", "class", "subclass", "disjoint", "union", "domain", "range",
                        "allvalues", "assert", "rule",
                    ]
                    .iter()
                    .map(|s| format!("`{s}`"))
                    .collect(),
                    found: format!("`{keyword}`"),
                    opened_at: None,
                }
                .into())
            }
        }
        cur.expect_end()?;
    }

    let ns = namespace.unwrap_or_default();
    for (name, line, column) in references {
        if name.namespace() == ns && !declared.contains(&name) {
            return Err(IoError::UnresolvedName {
                name: name.to_string(),
                line,
                column,
            });
        }
    }
    let mut kb = KnowledgeBase::new(ns);
    for (line, item) in items {
        kb = kb.assert(item).map_err(|source| IoError::Kb { line, source })?;
    }
    Ok(kb)
}

fn note_class(atom: &Atom, line: usize, col: usize, refs: &mut Vec<(EntityName, usize, usize)>) {
    if let Atom::Class { concept, .. } = atom {
        refs.push((concept.clone(), line, col));
    }
}

/// Renders `name` relative to the document namespace.
fn rel(name: &EntityName, ns: &str) -> String {
    if name.namespace() == ns {
        name.local().to_string()
    } else if name.namespace().is_empty() {
        // An unprefixed class would be read back into the document namespace.
        unreachable!("class and property names always carry a namespace when serialized")
    } else {
        name.to_string()
    }
}

fn term(t: &Term) -> String {
    t.to_string()
}

fn atom(a: &Atom, ns: &str) -> String {
    match a {
        Atom::Class { concept, subject } => format!("{}({})", rel(concept, ns), term(subject)),
        Atom::Property {
            property,
            subject,
            object,
        } => format!("{}({}, {})", rel(property, ns), term(subject), term(object)),
    }
}

/// Inverse of [`parse_ontology`] up to closures, which are not serialized.
/// Predicates must carry a namespace unless it equals the document one.
pub fn serialize_ontology(kb: &KnowledgeBase) -> String {
    let ns = kb.namespace();
    let mut out = String::new();
    if !ns.is_empty() {
        let _ = writeln!(out, "namespace {ns}");
    }
    for concept in kb.concepts().iter().filter(|c| c.namespace() == ns) {
        let _ = writeln!(out, "class {}", concept.local());
    }
    for axiom in kb.tbox() {
        let line = match axiom {
            TBoxAxiom::SubClassOf { sub, sup } => format!("subclass {} {}", rel(sub, ns), rel(sup, ns)),
            TBoxAxiom::DisjointClasses { a, b } => format!("disjoint {} {}", rel(a, ns), rel(b, ns)),
            TBoxAxiom::UnionEquivalence { whole, parts } => format!(
                "union {} = {}",
                rel(whole, ns),
                parts.iter().map(|p| rel(p, ns)).collect::<Vec<_>>().join(" | ")
            ),
            TBoxAxiom::PropertyDomain { property, class } => {
                format!("domain {} {}", rel(property, ns), rel(class, ns))
            }
            TBoxAxiom::PropertyRange { property, class } => {
                format!("range {} {}", rel(property, ns), rel(class, ns))
            }
            TBoxAxiom::AllValuesFrom {
                class,
                property,
                filler,
            } => format!("allvalues {} {} {}", rel(class, ns), rel(property, ns), rel(filler, ns)),
        };
        let _ = writeln!(out, "{line}");
    }
    for assertion in kb.abox() {
        let _ = writeln!(out, "{}", assertion_statement(&assertion, ns));
    }
    for rule in kb.rbox() {
        let body: Vec<String> = rule.body.iter().map(|a| atom(a, ns)).collect();
        let _ = writeln!(
            out,
            "rule {}: {} -> {}",
            rule.rule_id,
            body.join(", "),
            atom(&rule.head, ns)
        );
    }
    out
}

/// `assert Pred(args) @ t`, as accepted by [`parse_ontology`].
pub(crate) fn assertion_statement(a: &ABoxAssertion, ns: &str) -> String {
    format!("assert {} @ {}", atom(&a.atom, ns), a.asserted_at)
}

/// Parses a single `assert` statement in namespace `ns`.
pub(crate) fn parse_assertion(cur: &mut Cursor, ns: &str) -> Result<ABoxAssertion, IoError> {
    let line = cur.line;
    let (atom, _) = cur.atom(ns, TermMode::Explicit)?;
    let at = if cur.eat(&Tok::At) {
        cur.number("assertion time")?.0
    } else {
        0.0
    };
    if atom.to_ground().is_none() {
        return Err(IoError::Kb {
            line,
            source: crate::kb::KbError::MalformedItem(format!("A-Box atom {atom} is not ground")),
        });
    }
    Ok(ABoxAssertion::new(atom, at))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subclass_statement() {
        let kb = parse_ontology("namespace O1\nclass Action\nclass Event\nsubclass Action Event\n").unwrap();
        let axioms: Vec<_> = kb.tbox().cloned().collect();
        assert_eq!(
            axioms,
            vec![TBoxAxiom::SubClassOf {
                sub: EntityName::new("O1", "Action").unwrap(),
                sup: EntityName::new("O1", "Event").unwrap(),
            }]
        );
    }

    #[test]
    fn unclosed_paren_position() {
        let err = parse_ontology("assert Event(x").unwrap_err();
        let IoError::Parse(e) = err else { panic!("{err:?}") };
        assert_eq!(e.line, 1);
        assert_eq!(e.opened_at, Some(13));
        assert_eq!(e.column, 15);
    }

    #[test]
    fn namespace_only_is_empty() {
        let kb = parse_ontology("# nothing here\nnamespace O1\n\n").unwrap();
        assert_eq!(kb, KnowledgeBase::new("O1"));
    }

    #[test]
    fn forward_references_and_unresolved_names() {
        let ok = parse_ontology("namespace O\nsubclass A B\nclass A\nclass B\n");
        assert!(ok.is_ok());
        let err = parse_ontology("namespace O\nclass A\nsubclass A Missing\n").unwrap_err();
        assert_eq!(
            err,
            IoError::UnresolvedName { name: "O:Missing".into(), line: 3, column: 12 }
        );
        // Foreign names need no declaration.
        assert!(parse_ontology("namespace O\nclass A\nsubclass A P:B\n").is_ok());
    }

    #[test]
    fn unknown_keyword_and_trailing_garbage() {
        let IoError::Parse(e) = parse_ontology("namespace O\n  frobnicate A").unwrap_err() else {
            panic!()
        };
        assert_eq!((e.line, e.column), (2, 3));
        let IoError::Parse(e) = parse_ontology("namespace O\nclass A B").unwrap_err() else {
            panic!()
        };
        assert_eq!(e.column, 9);
    }

    #[test]
    fn non_ground_assertion_is_rejected() {
        let err = parse_ontology("namespace O\nclass E\nassert E(?x)").unwrap_err();
        assert!(matches!(err, IoError::Kb { line: 3, .. }));
    }

    #[test]
    fn rules_and_times() {
        let text = "namespace O\nclass Action\nclass Agent\nassert actor(m1, bob) @ 2.5\nrule acts: Action(?a), actor(?a, ?g) -> Agent(?g)\n";
        let kb = parse_ontology(text).unwrap();
        assert_eq!(kb.rbox().count(), 1);
        let a = kb.abox().next().unwrap();
        assert_eq!(a.asserted_at, 2.5);
        assert_eq!(parse_ontology(&serialize_ontology(&kb)).unwrap(), kb);
    }
}
