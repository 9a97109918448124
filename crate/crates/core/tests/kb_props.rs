mod common;

use std::collections::BTreeSet;

use common::*;
use ontoflux::kb::{GroundAtom, KbItem, Truth, Violation};
use proptest::prelude::*;

const CLASSES: usize = 5;
const PROPERTIES: usize = 2;
const INDIVIDUALS: usize = 4;

fn items() -> impl Strategy<Value = Vec<KbItem>> {
    prop::collection::vec(kb_item(CLASSES, PROPERTIES, INDIVIDUALS), 0..14)
}

fn facts(kb: &ontoflux::kb::KnowledgeBase) -> BTreeSet<GroundAtom> {
    kb.saturate().facts().cloned().collect()
}

proptest! {
    #![proptest_config(common::cases(200))]

    #[test]
    fn chainer_agrees_with_naive_fixpoint(items in items()) {
        let kb = build_kb(LOCAL, &items);
        prop_assert_eq!(facts(&kb), kb_closure(&kb));
    }

    #[test]
    fn entailment_is_monotone(items in items(), extra in kb_item(CLASSES, PROPERTIES, INDIVIDUALS)) {
        let kb = build_kb(LOCAL, &items);
        let bigger = kb.assert(extra).unwrap();
        prop_assert!(facts(&kb).is_subset(&facts(&bigger)));
    }

    #[test]
    fn saturation_is_a_fixpoint(items in items()) {
        let kb = build_kb(LOCAL, &items);
        let once = kb.saturate();
        let twice = kb.chainer().saturate(once.facts().cloned());
        prop_assert_eq!(
            once.facts().collect::<Vec<_>>(),
            twice.facts().collect::<Vec<_>>()
        );
    }

    #[test]
    fn insertions_are_bounded(items in items()) {
        let kb = build_kb(LOCAL, &items);
        let sat = kb.saturate();
        let individuals: BTreeSet<_> = sat
            .facts()
            .flat_map(|f| f.individuals().into_iter().cloned())
            .collect();
        let n = individuals.len();
        let bound = n * CLASSES + n * n * PROPERTIES;
        prop_assert!(sat.insertions() <= bound, "{} > {}", sat.insertions(), bound);
        prop_assert_eq!(sat.insertions(), sat.len());
    }

    #[test]
    fn assertion_order_is_irrelevant(items in items()) {
        let forward = build_kb(LOCAL, &items);
        let mut reversed_items = items.clone();
        reversed_items.reverse();
        prop_assert_eq!(forward, build_kb(LOCAL, &reversed_items));
    }

    #[test]
    fn closed_concepts_answer_definitely(items in items(), c in 0..CLASSES, i in 0..INDIVIDUALS) {
        let kb = build_kb(LOCAL, &items);
        let concept = name(LOCAL, &format!("C{c}"));
        let who = ind(&format!("i{i}"));
        let before = kb.is_member(&who, &concept);
        let entailed = kb_closure(&kb).contains(&GroundAtom::Class { concept: concept.clone(), individual: who.clone() });
        prop_assert_eq!(before, if entailed { Truth::True } else { Truth::Unknown });
        if let Ok(closed) = kb.close_class(&concept, 1.0) {
            let expected = if entailed { Truth::True } else { Truth::False };
            prop_assert_eq!(closed.is_member(&who, &concept), expected);
        }
    }

    #[test]
    fn disjointness_violations_match_closure(items in items()) {
        let kb = build_kb(LOCAL, &items);
        let closure = kb_closure(&kb);
        let mut expected = BTreeSet::new();
        for axiom in kb.tbox() {
            if let ontoflux::kb::TBoxAxiom::DisjointClasses { a, b } = axiom {
                for f in &closure {
                    if let GroundAtom::Class { concept, individual } = f {
                        let other = GroundAtom::Class { concept: b.clone(), individual: individual.clone() };
                        if concept == a && closure.contains(&other) {
                            expected.insert((individual.clone(), a.clone(), b.clone()));
                        }
                    }
                }
            }
        }
        let found: BTreeSet<_> = kb
            .check_disjointness()
            .into_iter()
            .map(|v| match v {
                Violation::Disjoint { individual, a, b } => (individual, a, b),
                other => panic!("unexpected {other:?}"),
            })
            .collect();
        prop_assert_eq!(found, expected);
    }
}
