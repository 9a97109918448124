//! Shared helpers for the integration and acceptance tests: fixture access,
//! a naive reference chainer, the possible-worlds oracle and proptest
//! generators.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use ontoflux::kb::{
    ABoxAssertion, Atom, Binding, EntityName, GroundAtom, HornRule, KbItem, KnowledgeBase,
    TBoxAxiom, Term,
};
use ontoflux::merge::Mapping;
use proptest::prelude::*;

pub mod temporal;

/// Proptest settings without on-disk failure persistence.
pub fn cases(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// MFrag fixture file and the exact error kinds it must produce.
pub const MFRAG_FIXTURES: [(&str, &[&str]); 8] = [
    ("valid.mfrag", &[]),
    ("cycle.mfrag", &["CycleDetected"]),
    ("overlap.mfrag", &["DisjointnessViolated"]),
    ("missing_distribution.mfrag", &["MissingDistribution"]),
    ("missing_instance.mfrag", &["MissingActionInstance"]),
    ("row_sum.mfrag", &["RowSumMismatch"]),
    ("uncovered.mfrag", &["UncoveredParentCombination"]),
    ("duplicate_home.mfrag", &["DuplicateHome"]),
];

pub fn name(ns: &str, local: &str) -> EntityName {
    EntityName::new(ns, local).unwrap()
}

pub fn ind(local: &str) -> EntityName {
    EntityName::global(local).unwrap()
}

/// Matches `pattern` against `fact`, extending `binding`.
fn matches(pattern: &Atom, fact: &GroundAtom, binding: &Binding) -> Option<Binding> {
    let pairs: Vec<(&Term, &EntityName)> = match (pattern, fact) {
        (Atom::Class { concept, subject }, GroundAtom::Class { concept: c, individual }) if concept == c => {
            vec![(subject, individual)]
        }
        (
            Atom::Property { property, subject, object },
            GroundAtom::Property { property: p, subject: s, object: o },
        ) if property == p => vec![(subject, s), (object, o)],
        _ => return None,
    };
    let mut b = binding.clone();
    for (term, value) in pairs {
        match term {
            Term::Individual(i) if i != value => return None,
            Term::Individual(_) => {}
            Term::Variable(v) => match b.get(v) {
                Some(bound) if bound != value => return None,
                Some(_) => {}
                None => {
                    b.insert(v.clone(), value.clone());
                }
            },
        }
    }
    Some(b)
}

fn instantiate(atom: &Atom, b: &Binding) -> GroundAtom {
    let get = |t: &Term| match t {
        Term::Individual(i) => i.clone(),
        Term::Variable(v) => b[v].clone(),
    };
    match atom {
        Atom::Class { concept, subject } => GroundAtom::Class {
            concept: concept.clone(),
            individual: get(subject),
        },
        Atom::Property { property, subject, object } => GroundAtom::Property {
            property: property.clone(),
            subject: get(subject),
            object: get(object),
        },
    }
}

/// Every binding under which all `atoms` are in `facts`, by brute force.
pub fn all_bindings(atoms: &[Atom], facts: &BTreeSet<GroundAtom>) -> Vec<Binding> {
    let mut partial = vec![Binding::new()];
    for atom in atoms {
        partial = partial
            .iter()
            .flat_map(|b| facts.iter().filter_map(move |f| matches(atom, f, b)))
            .collect();
    }
    partial.sort();
    partial.dedup();
    partial
}

/// Least fixpoint by repeated full passes over every rule.
pub fn naive_closure(
    tbox: &[TBoxAxiom],
    rbox: &[HornRule],
    seed: impl IntoIterator<Item = GroundAtom>,
) -> BTreeSet<GroundAtom> {
    let mut facts: BTreeSet<GroundAtom> = seed.into_iter().collect();
    loop {
        let mut new = BTreeSet::new();
        for fact in &facts {
            for axiom in tbox {
                match (axiom, fact) {
                    (TBoxAxiom::SubClassOf { sub, sup }, GroundAtom::Class { concept, individual })
                        if concept == sub =>
                    {
                        new.insert(GroundAtom::Class { concept: sup.clone(), individual: individual.clone() });
                    }
                    (TBoxAxiom::UnionEquivalence { whole, parts }, GroundAtom::Class { concept, individual })
                        if parts.contains(concept) =>
                    {
                        new.insert(GroundAtom::Class { concept: whole.clone(), individual: individual.clone() });
                    }
                    (TBoxAxiom::PropertyDomain { property, class }, GroundAtom::Property { property: p, subject, .. })
                        if p == property =>
                    {
                        new.insert(GroundAtom::Class { concept: class.clone(), individual: subject.clone() });
                    }
                    (TBoxAxiom::PropertyRange { property, class }, GroundAtom::Property { property: p, object, .. })
                        if p == property =>
                    {
                        new.insert(GroundAtom::Class { concept: class.clone(), individual: object.clone() });
                    }
                    _ => {}
                }
            }
        }
        for rule in rbox {
            for b in all_bindings(&rule.body, &facts) {
                new.insert(instantiate(&rule.head, &b));
            }
        }
        let before = facts.len();
        facts.extend(new);
        if facts.len() == before {
            return facts;
        }
    }
}

pub fn kb_closure(kb: &KnowledgeBase) -> BTreeSet<GroundAtom> {
    let tbox: Vec<TBoxAxiom> = kb.tbox().cloned().collect();
    let rbox: Vec<HornRule> = kb.rbox().cloned().collect();
    naive_closure(&tbox, &rbox, kb.asserted_facts().cloned())
}

/// Query probability per binding, by summing the weights of the mapping
/// worlds in which the binding is an answer. Each mapping holds
/// independently with its probability; a holding mapping carries every
/// matching external assertion into the local ontology.
pub fn possible_worlds(
    local: &KnowledgeBase,
    external: &KnowledgeBase,
    mappings: &[Mapping],
    query: &[Atom],
) -> BTreeMap<Binding, f64> {
    let tbox: Vec<TBoxAxiom> = local.tbox().cloned().collect();
    let rbox: Vec<HornRule> = local.rbox().cloned().collect();
    let external_facts: Vec<GroundAtom> = external.asserted_facts().cloned().collect();
    let vars: BTreeSet<String> = query.iter().flat_map(Atom::variables).collect();
    let mut out: BTreeMap<Binding, f64> = BTreeMap::new();
    for mask in 0u32..(1 << mappings.len()) {
        let mut weight = 1.0;
        let mut seed: Vec<GroundAtom> = local.asserted_facts().cloned().collect();
        for (i, m) in mappings.iter().enumerate() {
            if mask & (1 << i) == 0 {
                weight *= 1.0 - m.probability;
                continue;
            }
            weight *= m.probability;
            for fact in &external_facts {
                if let Some(b) = matches(&m.source, fact, &Binding::new()) {
                    seed.push(instantiate(&m.target, &b));
                }
            }
        }
        let facts = naive_closure(&tbox, &rbox, seed);
        for b in all_bindings(query, &facts) {
            let b: Binding = b.into_iter().filter(|(v, _)| vars.contains(v)).collect();
            *out.entry(b).or_insert(0.0) += weight;
        }
    }
    out
}

// ---------------------------------------------------------------- generators

pub const LOCAL: &str = "L";
pub const OTHER: &str = "X";

pub fn class_in(ns: &'static str, pool: usize) -> impl Strategy<Value = EntityName> {
    (0..pool).prop_map(move |i| name(ns, &format!("C{i}")))
}

pub fn property_in(ns: &'static str, pool: usize) -> impl Strategy<Value = EntityName> {
    (0..pool).prop_map(move |i| name(ns, &format!("p{i}")))
}

pub fn individual(pool: usize) -> impl Strategy<Value = EntityName> {
    (0..pool).prop_map(|i| ind(&format!("i{i}")))
}

pub fn ground_atom(classes: usize, properties: usize, individuals: usize) -> impl Strategy<Value = GroundAtom> {
    prop_oneof![
        (class_in(LOCAL, classes), individual(individuals))
            .prop_map(|(concept, individual)| GroundAtom::Class { concept, individual }),
        (property_in(LOCAL, properties), individual(individuals), individual(individuals))
            .prop_map(|(property, subject, object)| GroundAtom::Property { property, subject, object }),
    ]
}

pub fn tbox_axiom(classes: usize, properties: usize) -> impl Strategy<Value = TBoxAxiom> {
    let c = move || class_in(LOCAL, classes);
    let p = move || property_in(LOCAL, properties);
    prop_oneof![
        (c(), c()).prop_map(|(sub, sup)| TBoxAxiom::SubClassOf { sub, sup }),
        (c(), c(), c()).prop_map(|(whole, a, b)| TBoxAxiom::UnionEquivalence { whole, parts: vec![a, b] }),
        (p(), c()).prop_map(|(property, class)| TBoxAxiom::PropertyDomain { property, class }),
        (p(), c()).prop_map(|(property, class)| TBoxAxiom::PropertyRange { property, class }),
        (c(), c()).prop_map(|(a, b)| TBoxAxiom::DisjointClasses { a, b }),
        (c(), p(), c()).prop_map(|(class, property, filler)| TBoxAxiom::AllValuesFrom { class, property, filler }),
    ]
}

fn var_term() -> impl Strategy<Value = Term> {
    prop_oneof![Just(Term::var("x")), Just(Term::var("y")), Just(Term::var("z"))]
}

pub fn pattern_atom(classes: usize, properties: usize) -> impl Strategy<Value = Atom> {
    prop_oneof![
        (class_in(LOCAL, classes), var_term()).prop_map(|(c, s)| Atom::Class { concept: c, subject: s }),
        (property_in(LOCAL, properties), var_term(), var_term())
            .prop_map(|(p, s, o)| Atom::Property { property: p, subject: s, object: o }),
    ]
}

/// A safe Horn rule: the head only uses body variables.
pub fn horn_rule(classes: usize, properties: usize) -> impl Strategy<Value = HornRule> {
    (
        0u32..100,
        prop::collection::vec(pattern_atom(classes, properties), 1..=2),
        pattern_atom(classes, properties),
    )
        .prop_filter_map("head must be safe", |(id, body, head)| {
            let bound: BTreeSet<String> = body.iter().flat_map(Atom::variables).collect();
            head.variables().is_subset(&bound).then(|| HornRule {
                rule_id: format!("r{id}"),
                body,
                head,
            })
        })
}

/// KB items that a knowledge base always accepts.
pub fn kb_item(classes: usize, properties: usize, individuals: usize) -> impl Strategy<Value = KbItem> {
    prop_oneof![
        3 => (ground_atom(classes, properties, individuals), 0u32..40)
            .prop_map(|(a, t)| KbItem::ABox(ABoxAssertion::new(a.to_atom(), f64::from(t) * 0.25))),
        2 => tbox_axiom(classes, properties)
            .prop_filter("distinct disjoint classes", |ax| match ax {
                TBoxAxiom::DisjointClasses { a, b } => a != b,
                TBoxAxiom::UnionEquivalence { parts, .. } => parts[0] != parts[1],
                _ => true,
            })
            .prop_map(KbItem::TBox),
        1 => horn_rule(classes, properties).prop_map(KbItem::RBox),
    ]
}

pub fn build_kb(ns: &str, items: &[KbItem]) -> KnowledgeBase {
    KnowledgeBase::new(ns).assert_all(items.iter().cloned()).expect("generated items are valid")
}
