//! Restricted forward chaining.
//!
//! Single-premise consequences come from the T-Box (subclass, union part to
//! whole, property domain and range). Multi-premise consequences come from
//! the safe Horn rules of the R-Box, which only ever bind variables to
//! individuals already present in some fact.
//!
//! The chainer is generic over an [`Annotation`] carried by every fact. The
//! unit annotation gives plain entailment; the probabilistic merge uses it to
//! track which mappings each derived fact depends on.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Atom, Binding, EntityName, GroundAtom, HornRule, Predicate, TBoxAxiom};

/// Per-fact bookkeeping threaded through the fixpoint.
pub trait Annotation: Clone + PartialEq {
    /// Annotation of a fact derived jointly from all `premises`.
    fn conjoin(premises: &[&Self]) -> Self;

    /// Folds in an alternative derivation. Returns `true` iff `self` grew.
    fn absorb(&mut self, other: Self) -> bool;
}

impl Annotation for () {
    fn conjoin(_: &[&Self]) -> Self {}

    fn absorb(&mut self, _: Self) -> bool {
        false
    }
}

pub struct Chainer<'a> {
    implied_classes: BTreeMap<&'a EntityName, Vec<&'a EntityName>>,
    domains: BTreeMap<&'a EntityName, Vec<&'a EntityName>>,
    ranges: BTreeMap<&'a EntityName, Vec<&'a EntityName>>,
    rules: Vec<&'a HornRule>,
}

impl<'a> Chainer<'a> {
    pub fn new(
        tbox: impl IntoIterator<Item = &'a TBoxAxiom>,
        rbox: impl IntoIterator<Item = &'a HornRule>,
    ) -> Self {
        let mut implied_classes: BTreeMap<_, Vec<_>> = BTreeMap::new();
        let mut domains: BTreeMap<_, Vec<_>> = BTreeMap::new();
        let mut ranges: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for axiom in tbox {
            match axiom {
                TBoxAxiom::SubClassOf { sub, sup } => {
                    implied_classes.entry(sub).or_default().push(sup)
                }
                TBoxAxiom::UnionEquivalence { whole, parts } => {
                    for part in parts {
                        implied_classes.entry(part).or_default().push(whole);
                    }
                }
                TBoxAxiom::PropertyDomain { property, class } => {
                    domains.entry(property).or_default().push(class)
                }
                TBoxAxiom::PropertyRange { property, class } => {
                    ranges.entry(property).or_default().push(class)
                }
                TBoxAxiom::DisjointClasses { .. } | TBoxAxiom::AllValuesFrom { .. } => {}
            }
        }
        Self {
            implied_classes,
            domains,
            ranges,
            rules: rbox.into_iter().collect(),
        }
    }

    /// Plain least fixpoint.
    pub fn saturate(&self, facts: impl IntoIterator<Item = GroundAtom>) -> Saturation {
        let (facts, insertions) = self.saturate_annotated(facts.into_iter().map(|f| (f, ())));
        let mut sat = Saturation {
            by_predicate: BTreeMap::new(),
            insertions,
        };
        for fact in facts.into_keys() {
            sat.by_predicate
                .entry(fact.predicate())
                .or_default()
                .insert(fact);
        }
        sat
    }

    /// Least fixpoint with annotations. Returns every fact with its final
    /// annotation and the number of distinct facts inserted.
    pub fn saturate_annotated<A: Annotation>(
        &self,
        seeds: impl IntoIterator<Item = (GroundAtom, A)>,
    ) -> (BTreeMap<GroundAtom, A>, usize) {
        let mut state = State {
            facts: BTreeMap::new(),
            index: BTreeMap::new(),
            queue: VecDeque::new(),
            queued: BTreeSet::new(),
            insertions: 0,
        };
        for (fact, ann) in seeds {
            state.add(fact, ann);
        }
        while let Some(fact) = state.queue.pop_front() {
            state.queued.remove(&fact);
            let ann = state.facts[&fact].clone();
            for derived in self.direct_consequences(&fact) {
                state.add(derived, ann.clone());
            }
            let mut fired = Vec::new();
            for rule in &self.rules {
                for (k, pattern) in rule.body.iter().enumerate() {
                    let Some(binding) = pattern.unify(&fact, &Binding::new()) else {
                        continue;
                    };
                    let rest: Vec<&Atom> = rule
                        .body
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != k)
                        .map(|(_, a)| a)
                        .collect();
                    let mut matched = vec![&fact];
                    state.join(&rest, binding, &mut matched, &mut |b, premises| {
                        if let Some(head) = rule.head.substitute(b) {
                            let anns: Vec<&A> = premises.iter().map(|p| &state.facts[*p]).collect();
                            fired.push((head, A::conjoin(&anns)));
                        }
                    });
                }
            }
            for (head, ann) in fired {
                state.add(head, ann);
            }
        }
        (state.facts, state.insertions)
    }

    fn direct_consequences(&self, fact: &GroundAtom) -> Vec<GroundAtom> {
        let mut out = Vec::new();
        let classes_of = |individual: &EntityName, classes: Option<&Vec<&EntityName>>, out: &mut Vec<GroundAtom>| {
            for class in classes.into_iter().flatten() {
                out.push(GroundAtom::Class {
                    concept: (*class).clone(),
                    individual: individual.clone(),
                });
            }
        };
        match fact {
            GroundAtom::Class {
                concept,
                individual,
            } => classes_of(individual, self.implied_classes.get(concept), &mut out),
            GroundAtom::Property {
                property,
                subject,
                object,
            } => {
                classes_of(subject, self.domains.get(property), &mut out);
                classes_of(object, self.ranges.get(property), &mut out);
            }
        }
        out
    }
}

struct State<A> {
    facts: BTreeMap<GroundAtom, A>,
    index: BTreeMap<Predicate, BTreeSet<GroundAtom>>,
    queue: VecDeque<GroundAtom>,
    queued: BTreeSet<GroundAtom>,
    insertions: usize,
}

impl<A: Annotation> State<A> {
    fn add(&mut self, fact: GroundAtom, ann: A) {
        let changed = match self.facts.get_mut(&fact) {
            Some(existing) => existing.absorb(ann),
            None => {
                self.index
                    .entry(fact.predicate())
                    .or_default()
                    .insert(fact.clone());
                self.facts.insert(fact.clone(), ann);
                self.insertions += 1;
                true
            }
        };
        if changed && self.queued.insert(fact.clone()) {
            self.queue.push_back(fact);
        }
    }

    fn join<'s>(
        &'s self,
        rest: &[&Atom],
        binding: Binding,
        matched: &mut Vec<&'s GroundAtom>,
        emit: &mut dyn FnMut(&Binding, &[&'s GroundAtom]),
    ) {
        let Some((first, tail)) = rest.split_first() else {
            emit(&binding, matched);
            return;
        };
        let Some(candidates) = self.index.get(&first.predicate()) else {
            return;
        };
        for candidate in candidates {
            if let Some(extended) = first.unify(candidate, &binding) {
                matched.push(candidate);
                self.join(tail, extended, matched, emit);
                matched.pop();
            }
        }
    }
}

/// Result of plain saturation.
#[derive(Debug, Clone, PartialEq)]
pub struct Saturation {
    by_predicate: BTreeMap<Predicate, BTreeSet<GroundAtom>>,
    insertions: usize,
}

impl Saturation {
    pub fn members(&self, concept: &EntityName) -> BTreeSet<EntityName> {
        self.by_predicate
            .get(&Predicate::Class(concept.clone()))
            .into_iter()
            .flatten()
            .filter_map(|f| match f {
                GroundAtom::Class { individual, .. } => Some(individual.clone()),
                GroundAtom::Property { .. } => None,
            })
            .collect()
    }

    pub fn contains_member(&self, concept: &EntityName, individual: &EntityName) -> bool {
        self.contains(&GroundAtom::Class {
            concept: concept.clone(),
            individual: individual.clone(),
        })
    }

    pub fn objects(&self, property: &EntityName, subject: &EntityName) -> BTreeSet<EntityName> {
        self.by_predicate
            .get(&Predicate::Property(property.clone()))
            .into_iter()
            .flatten()
            .filter_map(|f| match f {
                GroundAtom::Property { subject: s, object, .. } if s == subject => {
                    Some(object.clone())
                }
                _ => None,
            })
            .collect()
    }

    pub fn contains(&self, fact: &GroundAtom) -> bool {
        self.by_predicate
            .get(&fact.predicate())
            .is_some_and(|set| set.contains(fact))
    }

    pub fn facts(&self) -> impl Iterator<Item = &GroundAtom> {
        self.by_predicate.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.by_predicate.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distinct facts inserted while saturating, seeds included.
    pub fn insertions(&self) -> usize {
        self.insertions
    }
}
