//! Probabilistic mappings between a local and an external ontology, the
//! merged fact base they induce, and conjunctive queries over it.
//!
//! Every derived fact keeps its lineage: the minimal sets of mappings that
//! must all hold for the fact to be derivable. A locally entailed fact has
//! the empty set in its lineage and is therefore certain. The stored fact
//! probability is the noisy-OR over lineage paths, each path scored by the
//! smallest mapping probability on it. Query answers are scored exactly by
//! enumerating mapping outcomes whenever independence cannot be assumed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::kb::{Annotation, Atom, Binding, GroundAtom, KnowledgeBase, Predicate};

/// Largest number of distinct mappings scored by exact enumeration.
pub const EXACT_ENUMERATION_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MergeError {
    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("noisy-OR of an empty list")]
    EmptyList,
    #[error("malformed mapping {id}: {reason}")]
    MalformedMapping { id: String, reason: String },
    #[error("mapping {id} targets namespace `{found}` but the local ontology is `{expected}`")]
    NamespaceClash {
        id: String,
        expected: String,
        found: String,
    },
    #[error("unsafe query: {0}")]
    UnsafeQuery(String),
}

pub fn complement(p: f64) -> Result<f64, MergeError> {
    if (0.0..=1.0).contains(&p) {
        Ok(1.0 - p)
    } else {
        Err(MergeError::OutOfRange(p))
    }
}

/// `1 − Π(1 − pᵢ)`.
pub fn combine_noisy_or(ps: &[f64]) -> Result<f64, MergeError> {
    if ps.is_empty() {
        return Err(MergeError::EmptyList);
    }
    let mut miss = 1.0;
    for &p in ps {
        miss *= complement(p)?;
    }
    Ok(1.0 - miss)
}

/// `target ← source ; P(probability)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mapping {
    pub mapping_id: String,
    pub source: Atom,
    pub target: Atom,
    pub probability: f64,
    /// Probability that a non-member of the source belongs to the target.
    /// Stored when supplied; not used in scoring.
    pub absent_probability: Option<f64>,
}

impl Mapping {
    pub fn new(
        mapping_id: impl Into<String>,
        target: Atom,
        source: Atom,
        probability: f64,
    ) -> Result<Self, MergeError> {
        let m = Self {
            mapping_id: mapping_id.into(),
            source,
            target,
            probability,
            absent_probability: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MergeError> {
        let bad = |reason: String| MergeError::MalformedMapping {
            id: self.mapping_id.clone(),
            reason,
        };
        for p in std::iter::once(self.probability).chain(self.absent_probability) {
            if !(0.0..=1.0).contains(&p) {
                return Err(bad(format!("probability {p} outside [0, 1]")));
            }
        }
        if self.source.variables() != self.target.variables() {
            return Err(bad("source and target variables differ".into()));
        }
        let (src, tgt) = (self.source.predicate(), self.target.predicate());
        if src.name().namespace() == tgt.name().namespace() {
            return Err(bad(format!(
                "source and target share namespace `{}`",
                src.name().namespace()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} <- {} ; P({})",
            self.mapping_id, self.target, self.source, self.probability
        )
    }
}

/// Antichain of mapping-index sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lineage(BTreeSet<BTreeSet<usize>>);

impl Lineage {
    pub fn certain() -> Self {
        Lineage(BTreeSet::from([BTreeSet::new()]))
    }

    pub fn single(mapping: usize) -> Self {
        Lineage(BTreeSet::from([BTreeSet::from([mapping])]))
    }

    pub fn is_certain(&self) -> bool {
        self.0.contains(&BTreeSet::new())
    }

    pub fn paths(&self) -> impl Iterator<Item = &BTreeSet<usize>> {
        self.0.iter()
    }

    pub fn mappings(&self) -> BTreeSet<usize> {
        self.0.iter().flatten().copied().collect()
    }

    fn add_path(&mut self, path: BTreeSet<usize>) -> bool {
        if self.0.iter().any(|p| p.is_subset(&path)) {
            return false;
        }
        self.0.retain(|p| !path.is_subset(p));
        self.0.insert(path);
        true
    }

    /// Holds in a world where exactly the mappings in `world` hold.
    fn holds_in(&self, world: &BTreeSet<usize>) -> bool {
        self.0.iter().any(|p| p.is_subset(world))
    }
}

impl Annotation for Lineage {
    fn conjoin(premises: &[&Self]) -> Self {
        let mut acc = Lineage::certain();
        for premise in premises {
            let mut next = Lineage::default();
            for left in &acc.0 {
                for right in &premise.0 {
                    next.add_path(left.union(right).copied().collect());
                }
            }
            acc = next;
        }
        acc
    }

    fn absorb(&mut self, other: Self) -> bool {
        let mut changed = false;
        for path in other.0 {
            changed |= self.add_path(path);
        }
        changed
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Local,
    Mapped(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFact {
    pub atom: GroundAtom,
    pub probability: f64,
    pub provenance: Provenance,
    pub lineage: Lineage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedKB {
    pub local: KnowledgeBase,
    pub external: KnowledgeBase,
    pub mappings: Vec<Mapping>,
    derived: BTreeMap<GroundAtom, DerivedFact>,
    by_predicate: BTreeMap<Predicate, Vec<GroundAtom>>,
}

/// One query answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub binding: Binding,
    pub probability: f64,
    /// Set when too many mappings were involved for exact scoring and the
    /// independence product was used instead.
    pub approximate: bool,
}

impl MergedKB {
    pub fn derived(&self) -> impl Iterator<Item = &DerivedFact> {
        self.derived.values()
    }

    pub fn fact(&self, atom: &GroundAtom) -> Option<&DerivedFact> {
        self.derived.get(atom)
    }

    fn path_probability(&self, path: &BTreeSet<usize>) -> f64 {
        path.iter()
            .map(|&m| self.mappings[m].probability)
            .fold(1.0, f64::min)
    }

    fn fact_probability(&self, lineage: &Lineage) -> f64 {
        let ps: Vec<f64> = lineage.paths().map(|p| self.path_probability(p)).collect();
        combine_noisy_or(&ps).unwrap_or(0.0)
    }

    pub fn query(&self, conjuncts: &[Atom]) -> Result<Vec<Answer>, MergeError> {
        if conjuncts.is_empty() {
            return Err(MergeError::UnsafeQuery("empty conjunction".into()));
        }
        let mut solutions: Vec<(Binding, BTreeSet<&GroundAtom>)> = Vec::new();
        self.join(conjuncts, Binding::new(), &mut BTreeSet::new(), &mut solutions);

        let vars: BTreeSet<String> = conjuncts.iter().flat_map(Atom::variables).collect();
        let mut answers: Vec<Answer> = solutions
            .into_iter()
            .map(|(binding, facts)| {
                let binding: Binding = binding
                    .into_iter()
                    .filter(|(v, _)| vars.contains(v))
                    .collect();
                let lineages: Vec<&Lineage> = facts.iter().map(|f| &self.derived[*f].lineage).collect();
                let (probability, approximate) = self.score(&lineages);
                Answer {
                    binding,
                    probability,
                    approximate,
                }
            })
            .collect();
        answers.sort_by(|a, b| {
            b.probability
                .total_cmp(&a.probability)
                .then_with(|| a.binding.cmp(&b.binding))
        });
        answers.dedup_by(|a, b| a.binding == b.binding);
        Ok(answers)
    }

    fn join<'a>(
        &'a self,
        rest: &[Atom],
        binding: Binding,
        used: &mut BTreeSet<&'a GroundAtom>,
        out: &mut Vec<(Binding, BTreeSet<&'a GroundAtom>)>,
    ) {
        let Some((first, tail)) = rest.split_first() else {
            out.push((binding, used.clone()));
            return;
        };
        let Some(candidates) = self.by_predicate.get(&first.predicate()) else {
            return;
        };
        for fact in candidates {
            if let Some(extended) = first.unify(fact, &binding) {
                let fresh = used.insert(fact);
                self.join(tail, extended, used, out);
                if fresh {
                    used.remove(fact);
                }
            }
        }
    }

    /// Probability that every lineage holds simultaneously.
    fn score(&self, lineages: &[&Lineage]) -> (f64, bool) {
        let uncertain: Vec<&Lineage> = lineages.iter().copied().filter(|l| !l.is_certain()).collect();
        if uncertain.is_empty() {
            return (1.0, false);
        }
        let mut seen = BTreeSet::new();
        let independent = uncertain.iter().all(|l| {
            l.paths()
                .all(|p| p.len() == 1 && p.iter().all(|m| seen.insert(*m)))
        });
        let product = || uncertain.iter().map(|l| self.fact_probability(l)).product::<f64>();
        if independent {
            return (product(), false);
        }
        let involved: Vec<usize> = uncertain
            .iter()
            .flat_map(|l| l.mappings())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if involved.len() > EXACT_ENUMERATION_LIMIT {
            return (product(), true);
        }
        let mut total = 0.0;
        for mask in 0u32..(1u32 << involved.len()) {
            let mut world = BTreeSet::new();
            let mut weight = 1.0;
            for (bit, &m) in involved.iter().enumerate() {
                let p = self.mappings[m].probability;
                if mask & (1 << bit) != 0 {
                    world.insert(m);
                    weight *= p;
                } else {
                    weight *= 1.0 - p;
                }
            }
            if weight > 0.0 && uncertain.iter().all(|l| l.holds_in(&world)) {
                total += weight;
            }
        }
        (total, false)
    }
}

/// Merges `external` into `local` through `mappings`.
///
/// Mappings act on the facts the external ontology asserts. Derived targets
/// are then chained through the local T-Box and R-Box.
pub fn merge(
    local: &KnowledgeBase,
    external: &KnowledgeBase,
    mappings: &[Mapping],
) -> Result<MergedKB, MergeError> {
    for m in mappings {
        m.validate()?;
        let found = m.target.predicate().name().namespace().to_string();
        if found != local.namespace() {
            return Err(MergeError::NamespaceClash {
                id: m.mapping_id.clone(),
                expected: local.namespace().to_string(),
                found,
            });
        }
    }

    let mut seeds: Vec<(GroundAtom, Lineage)> = local
        .asserted_facts()
        .map(|f| (f.clone(), Lineage::certain()))
        .collect();
    for (index, m) in mappings.iter().enumerate() {
        for fact in external.asserted_facts() {
            if let Some(binding) = m.source.unify(fact, &Binding::new()) {
                if let Some(target) = m.target.substitute(&binding) {
                    seeds.push((target, Lineage::single(index)));
                }
            }
        }
    }
    let (facts, _) = local.chainer().saturate_annotated(seeds);

    let mut merged = MergedKB {
        local: local.clone(),
        external: external.clone(),
        mappings: mappings.to_vec(),
        derived: BTreeMap::new(),
        by_predicate: BTreeMap::new(),
    };
    for (atom, lineage) in facts {
        let provenance = if lineage.is_certain() {
            Provenance::Local
        } else {
            Provenance::Mapped(
                lineage
                    .mappings()
                    .into_iter()
                    .map(|m| mappings[m].mapping_id.clone())
                    .collect(),
            )
        };
        let probability = merged.fact_probability(&lineage);
        merged
            .by_predicate
            .entry(atom.predicate())
            .or_default()
            .push(atom.clone());
        merged.derived.insert(
            atom.clone(),
            DerivedFact {
                atom,
                probability,
                provenance,
                lineage,
            },
        );
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{ABoxAssertion, EntityName, HornRule, TBoxAxiom, Term};

    fn o1(s: &str) -> EntityName {
        EntityName::new("O1", s).unwrap()
    }

    fn o2(s: &str) -> EntityName {
        EntityName::new("O2", s).unwrap()
    }

    fn ind(s: &str) -> EntityName {
        EntityName::global(s).unwrap()
    }

    fn class_map(id: &str, target: &str, source: &str, p: f64) -> Mapping {
        Mapping::new(
            id,
            Atom::class(o1(target), Term::var("x")),
            Atom::class(o2(source), Term::var("x")),
            p,
        )
        .unwrap()
    }

    #[test]
    fn complement_values() {
        assert!((complement(0.8).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(complement(1.0).unwrap(), 0.0);
        assert_eq!(complement(0.5).unwrap(), 0.5);
        assert_eq!(complement(1.5), Err(MergeError::OutOfRange(1.5)));
        assert!(complement(-0.1).is_err());
    }

    #[test]
    fn noisy_or_values() {
        assert_eq!(combine_noisy_or(&[0.8]).unwrap(), 0.8);
        assert_eq!(combine_noisy_or(&[0.5, 0.5]).unwrap(), 0.75);
        assert_eq!(combine_noisy_or(&[0.37, 1.0]).unwrap(), 1.0);
        assert_eq!(combine_noisy_or(&[]), Err(MergeError::EmptyList));
        assert!(combine_noisy_or(&[0.2, 2.0]).is_err());
    }

    #[test]
    fn mapping_invariants() {
        let same_ns = Mapping::new(
            "m",
            Atom::class(o1("A"), Term::var("x")),
            Atom::class(o1("B"), Term::var("x")),
            0.5,
        );
        assert!(matches!(same_ns, Err(MergeError::MalformedMapping { .. })));
        let var_mismatch = Mapping::new(
            "m",
            Atom::class(o1("A"), Term::var("x")),
            Atom::class(o2("B"), Term::var("y")),
            0.5,
        );
        assert!(var_mismatch.is_err());
        let bad_p = Mapping::new(
            "m",
            Atom::class(o1("A"), Term::var("x")),
            Atom::class(o2("B"), Term::var("x")),
            1.3,
        );
        assert!(bad_p.is_err());
    }

    fn external() -> KnowledgeBase {
        KnowledgeBase::new("O2")
            .assert(ABoxAssertion::new(Atom::class(o2("Action"), ind("Trip")), 0.0))
            .unwrap()
    }

    #[test]
    fn mapped_and_local_facts() {
        let maps = [class_map("m2", "Event", "Action", 0.9)];
        let merged = merge(&KnowledgeBase::new("O1"), &external(), &maps).unwrap();
        let trip_event = Atom::class(o1("Event"), ind("Trip")).to_ground().unwrap();
        let fact = merged.fact(&trip_event).unwrap();
        assert_eq!(fact.probability, 0.9);
        assert_eq!(fact.provenance, Provenance::Mapped(vec!["m2".into()]));

        let local = KnowledgeBase::new("O1")
            .assert(ABoxAssertion::new(Atom::class(o1("Event"), ind("Trip")), 0.0))
            .unwrap();
        let merged = merge(&local, &external(), &maps).unwrap();
        let fact = merged.fact(&trip_event).unwrap();
        assert_eq!(fact.probability, 1.0);
        assert_eq!(fact.provenance, Provenance::Local);

        let plain = merge(&local, &external(), &[]).unwrap();
        assert_eq!(plain.derived().count(), 1);
    }

    #[test]
    fn namespace_clash() {
        let maps = [class_map("m", "Event", "Action", 0.9)];
        let err = merge(&KnowledgeBase::new("O3"), &external(), &maps).unwrap_err();
        assert!(matches!(err, MergeError::NamespaceClash { .. }));
    }

    #[test]
    fn chaining_takes_min_and_paths_combine() {
        let local = KnowledgeBase::new("O1")
            .assert(TBoxAxiom::SubClassOf { sub: o1("Action"), sup: o1("Event") })
            .unwrap();
        let ext = external()
            .assert(ABoxAssertion::new(Atom::class(o2("Event"), ind("Trip")), 0.0))
            .unwrap();
        let maps = [
            class_map("a", "Action", "Action", 0.6),
            class_map("e", "Event", "Event", 0.5),
        ];
        let merged = merge(&local, &ext, &maps).unwrap();
        let event = merged.fact(&Atom::class(o1("Event"), ind("Trip")).to_ground().unwrap()).unwrap();
        assert!((event.probability - 0.8).abs() < 1e-15);
    }

    #[test]
    fn horn_rule_premises_from_one_mapping_are_not_double_counted() {
        let local = KnowledgeBase::new("O1")
            .assert(HornRule {
                rule_id: "both".into(),
                body: vec![
                    Atom::class(o1("A"), Term::var("x")),
                    Atom::class(o1("B"), Term::var("x")),
                ],
                head: Atom::class(o1("C"), Term::var("x")),
            })
            .unwrap()
            .assert(TBoxAxiom::SubClassOf { sub: o1("A"), sup: o1("B") })
            .unwrap();
        let maps = [class_map("m", "A", "Action", 0.7)];
        let merged = merge(&local, &external(), &maps).unwrap();
        let answers = merged
            .query(&[Atom::class(o1("C"), Term::var("x")), Atom::class(o1("A"), Term::var("x"))])
            .unwrap();
        assert_eq!(answers.len(), 1);
        assert!((answers[0].probability - 0.7).abs() < 1e-15);
        assert!(!answers[0].approximate);
    }

    #[test]
    fn query_ordering_and_empty_cases() {
        let ext = external()
            .assert(ABoxAssertion::new(Atom::class(o2("Event"), ind("Holyday")), 0.0))
            .unwrap();
        let maps = [
            class_map("m1", "Event", "Event", 0.8),
            class_map("m2", "Event", "Action", 0.9),
        ];
        let merged = merge(&KnowledgeBase::new("O1"), &ext, &maps).unwrap();
        let answers = merged.query(&[Atom::class(o1("Event"), Term::var("x"))]).unwrap();
        let names: Vec<String> = answers.iter().map(|a| a.binding["x"].to_string()).collect();
        assert_eq!(names, ["Trip", "Holyday"]);
        assert!(merged.query(&[Atom::class(o1("Nothing"), Term::var("x"))]).unwrap().is_empty());
        assert!(matches!(merged.query(&[]), Err(MergeError::UnsafeQuery(_))));
    }

    #[test]
    fn lineage_absorption() {
        let mut l = Lineage::default();
        assert!(l.add_path(BTreeSet::from([1, 2])));
        assert!(!l.add_path(BTreeSet::from([1, 2, 3])));
        assert!(l.add_path(BTreeSet::from([1])));
        assert_eq!(l.paths().count(), 1);
        assert!(l.absorb(Lineage::certain()));
        assert!(l.is_certain());
    }
}
