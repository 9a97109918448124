//! Knowledge base: terminological axioms (T-Box), ground assertions (A-Box)
//! and safe Horn rules (R-Box), with a restricted forward chainer and
//! closed-world class closures.
//!
//! A [`KnowledgeBase`] is a value. Every operation that changes it returns a
//! new snapshot and leaves the receiver untouched.

mod reasoner;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub use reasoner::{Annotation, Chainer, Saturation};

/// Simulation / wall time in abstract time units.
pub type Time = f64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KbError {
    #[error("malformed item: {0}")]
    MalformedItem(String),
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("closure of {concept} at {now} precedes existing closure at {closed_at}")]
    ClosureRegression {
        concept: EntityName,
        now: Time,
        closed_at: Time,
    },
    #[error("cannot close unknown concept {0}")]
    UnknownConcept(EntityName),
}

pub(crate) fn is_token(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A possibly namespaced name. Individuals usually carry the empty namespace
/// so that the same individual can be referred to from several ontologies.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityName {
    namespace: String,
    local: String,
}

impl EntityName {
    pub fn new(namespace: impl Into<String>, local: impl Into<String>) -> Result<Self, KbError> {
        let namespace = namespace.into();
        let local = local.into();
        if !is_token(&local) || !(namespace.is_empty() || is_token(&namespace)) {
            return Err(KbError::InvalidName(format!("{namespace}:{local}")));
        }
        Ok(Self { namespace, local })
    }

    /// A name in the shared (empty) namespace.
    pub fn global(local: impl Into<String>) -> Result<Self, KbError> {
        Self::new("", local)
    }

    /// Parses `ns:local` or a bare `local` (which lands in `default_ns`).
    pub fn parse(text: &str, default_ns: &str) -> Result<Self, KbError> {
        match text.split_once(':') {
            Some((ns, local)) => Self::new(ns.trim(), local.trim()),
            None => Self::new(default_ns, text.trim()),
        }
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn local(&self) -> &str {
        &self.local
    }
}

impl fmt::Display for EntityName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.namespace.is_empty() {
            write!(f, "{}", self.local)
        } else {
            write!(f, "{}:{}", self.namespace, self.local)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Individual(EntityName),
    Variable(String),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Variable(name.to_string())
    }

    pub fn as_individual(&self) -> Option<&EntityName> {
        match self {
            Term::Individual(name) => Some(name),
            Term::Variable(_) => None,
        }
    }
}

impl From<EntityName> for Term {
    fn from(name: EntityName) -> Self {
        Term::Individual(name)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Individual(name) => write!(f, "{name}"),
            Term::Variable(v) => write!(f, "?{v}"),
        }
    }
}

/// Predicate symbol of an atom, with its arity encoded in the variant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    Class(EntityName),
    Property(EntityName),
}

impl Predicate {
    pub fn name(&self) -> &EntityName {
        match self {
            Predicate::Class(n) | Predicate::Property(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Class {
        concept: EntityName,
        subject: Term,
    },
    Property {
        property: EntityName,
        subject: Term,
        object: Term,
    },
}

impl Atom {
    pub fn class(concept: EntityName, subject: impl Into<Term>) -> Self {
        Atom::Class {
            concept,
            subject: subject.into(),
        }
    }

    pub fn property(property: EntityName, subject: impl Into<Term>, object: impl Into<Term>) -> Self {
        Atom::Property {
            property,
            subject: subject.into(),
            object: object.into(),
        }
    }

    pub fn predicate(&self) -> Predicate {
        match self {
            Atom::Class { concept, .. } => Predicate::Class(concept.clone()),
            Atom::Property { property, .. } => Predicate::Property(property.clone()),
        }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Atom::Class { subject, .. } => vec![subject],
            Atom::Property { subject, object, .. } => vec![subject, object],
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.terms()
            .into_iter()
            .filter_map(|t| match t {
                Term::Variable(v) => Some(v.clone()),
                Term::Individual(_) => None,
            })
            .collect()
    }

    pub fn is_ground(&self) -> bool {
        self.variables().is_empty()
    }

    pub fn to_ground(&self) -> Option<GroundAtom> {
        match self {
            Atom::Class { concept, subject } => Some(GroundAtom::Class {
                concept: concept.clone(),
                individual: subject.as_individual()?.clone(),
            }),
            Atom::Property {
                property,
                subject,
                object,
            } => Some(GroundAtom::Property {
                property: property.clone(),
                subject: subject.as_individual()?.clone(),
                object: object.as_individual()?.clone(),
            }),
        }
    }

    /// Extends `binding` so that this pattern equals `fact`, if possible.
    pub fn unify(&self, fact: &GroundAtom, binding: &Binding) -> Option<Binding> {
        let mut out = binding.clone();
        let pairs: Vec<(&Term, &EntityName)> = match (self, fact) {
            (
                Atom::Class { concept, subject },
                GroundAtom::Class {
                    concept: c,
                    individual,
                },
            ) if concept == c => vec![(subject, individual)],
            (
                Atom::Property {
                    property,
                    subject,
                    object,
                },
                GroundAtom::Property {
                    property: p,
                    subject: s,
                    object: o,
                },
            ) if property == p => vec![(subject, s), (object, o)],
            _ => return None,
        };
        for (term, value) in pairs {
            match term {
                Term::Individual(name) if name != value => return None,
                Term::Individual(_) => {}
                Term::Variable(v) => match out.get(v) {
                    Some(bound) if bound != value => return None,
                    Some(_) => {}
                    None => {
                        out.insert(v.clone(), value.clone());
                    }
                },
            }
        }
        Some(out)
    }

    /// Instantiates the pattern; `None` if a variable is left unbound.
    pub fn substitute(&self, binding: &Binding) -> Option<GroundAtom> {
        let resolve = |t: &Term| match t {
            Term::Individual(n) => Some(n.clone()),
            Term::Variable(v) => binding.get(v).cloned(),
        };
        match self {
            Atom::Class { concept, subject } => Some(GroundAtom::Class {
                concept: concept.clone(),
                individual: resolve(subject)?,
            }),
            Atom::Property {
                property,
                subject,
                object,
            } => Some(GroundAtom::Property {
                property: property.clone(),
                subject: resolve(subject)?,
                object: resolve(object)?,
            }),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Class { concept, subject } => write!(f, "{concept}({subject})"),
            Atom::Property {
                property,
                subject,
                object,
            } => write!(f, "{property}({subject}, {object})"),
        }
    }
}

/// Variable assignment produced by pattern matching.
pub type Binding = BTreeMap<String, EntityName>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroundAtom {
    Class {
        concept: EntityName,
        individual: EntityName,
    },
    Property {
        property: EntityName,
        subject: EntityName,
        object: EntityName,
    },
}

impl GroundAtom {
    pub fn predicate(&self) -> Predicate {
        match self {
            GroundAtom::Class { concept, .. } => Predicate::Class(concept.clone()),
            GroundAtom::Property { property, .. } => Predicate::Property(property.clone()),
        }
    }

    pub fn individuals(&self) -> Vec<&EntityName> {
        match self {
            GroundAtom::Class { individual, .. } => vec![individual],
            GroundAtom::Property { subject, object, .. } => vec![subject, object],
        }
    }

    pub fn to_atom(&self) -> Atom {
        match self {
            GroundAtom::Class {
                concept,
                individual,
            } => Atom::class(concept.clone(), individual.clone()),
            GroundAtom::Property {
                property,
                subject,
                object,
            } => Atom::property(property.clone(), subject.clone(), object.clone()),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_atom().fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TBoxAxiom {
    SubClassOf {
        sub: EntityName,
        sup: EntityName,
    },
    DisjointClasses {
        a: EntityName,
        b: EntityName,
    },
    UnionEquivalence {
        whole: EntityName,
        parts: Vec<EntityName>,
    },
    PropertyDomain {
        property: EntityName,
        class: EntityName,
    },
    PropertyRange {
        property: EntityName,
        class: EntityName,
    },
    /// `class ⊑ ∀property.filler`; checked, never used for inference.
    AllValuesFrom {
        class: EntityName,
        property: EntityName,
        filler: EntityName,
    },
}

impl TBoxAxiom {
    fn normalized(self) -> Result<Self, KbError> {
        match self {
            TBoxAxiom::DisjointClasses { a, b } => {
                if a == b {
                    return Err(KbError::MalformedItem(format!(
                        "disjointness of {a} with itself"
                    )));
                }
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                Ok(TBoxAxiom::DisjointClasses { a, b })
            }
            TBoxAxiom::UnionEquivalence { whole, mut parts } => {
                parts.sort();
                parts.dedup();
                if parts.len() < 2 {
                    return Err(KbError::MalformedItem(format!(
                        "union for {whole} needs at least two distinct parts"
                    )));
                }
                Ok(TBoxAxiom::UnionEquivalence { whole, parts })
            }
            other => Ok(other),
        }
    }

    fn concepts(&self) -> Vec<&EntityName> {
        match self {
            TBoxAxiom::SubClassOf { sub, sup } => vec![sub, sup],
            TBoxAxiom::DisjointClasses { a, b } => vec![a, b],
            TBoxAxiom::UnionEquivalence { whole, parts } => {
                std::iter::once(whole).chain(parts.iter()).collect()
            }
            TBoxAxiom::PropertyDomain { class, .. } | TBoxAxiom::PropertyRange { class, .. } => {
                vec![class]
            }
            TBoxAxiom::AllValuesFrom { class, filler, .. } => vec![class, filler],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ABoxAssertion {
    pub atom: Atom,
    pub asserted_at: Time,
}

impl ABoxAssertion {
    pub fn new(atom: Atom, asserted_at: Time) -> Self {
        Self { atom, asserted_at }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HornRule {
    pub rule_id: String,
    pub body: Vec<Atom>,
    pub head: Atom,
}

impl HornRule {
    fn validate(&self) -> Result<(), KbError> {
        if !is_token(&self.rule_id) {
            return Err(KbError::MalformedItem(format!(
                "rule id `{}` is not a token",
                self.rule_id
            )));
        }
        if self.body.is_empty() {
            return Err(KbError::MalformedItem(format!(
                "rule {} has an empty body",
                self.rule_id
            )));
        }
        let bound: BTreeSet<String> = self.body.iter().flat_map(Atom::variables).collect();
        if let Some(v) = self.head.variables().difference(&bound).next() {
            return Err(KbError::MalformedItem(format!(
                "rule {}: head variable ?{v} does not occur in the body",
                self.rule_id
            )));
        }
        Ok(())
    }
}

/// Anything that can be told to a knowledge base.
#[derive(Debug, Clone, PartialEq)]
pub enum KbItem {
    TBox(TBoxAxiom),
    ABox(ABoxAssertion),
    RBox(HornRule),
}

impl From<TBoxAxiom> for KbItem {
    fn from(a: TBoxAxiom) -> Self {
        KbItem::TBox(a)
    }
}

impl From<ABoxAssertion> for KbItem {
    fn from(a: ABoxAssertion) -> Self {
        KbItem::ABox(a)
    }
}

impl From<HornRule> for KbItem {
    fn from(r: HornRule) -> Self {
        KbItem::RBox(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureRecord {
    pub concept: EntityName,
    pub members: BTreeSet<EntityName>,
    pub closed_at: Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    /// `individual` is entailed to be in both halves of `a ⊓ b ⊑ ⊥`.
    Disjoint {
        individual: EntityName,
        a: EntityName,
        b: EntityName,
    },
    /// `individual ∈ class`, `property(individual, value)`, and `value` is
    /// definitely not a `filler` (the filler concept is closed).
    AllValuesFrom {
        individual: EntityName,
        class: EntityName,
        property: EntityName,
        value: EntityName,
        filler: EntityName,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Disjoint { individual, a, b } => {
                write!(f, "{individual} is a member of disjoint classes {a} and {b}")
            }
            Violation::AllValuesFrom {
                individual,
                class,
                property,
                value,
                filler,
            } => write!(
                f,
                "{individual}: {class} requires every {property} value to be {filler}, but {value} is not"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    namespace: String,
    tbox: BTreeSet<TBoxAxiom>,
    abox: BTreeMap<GroundAtom, Time>,
    rbox: BTreeSet<HornRule>,
    closures: BTreeMap<EntityName, ClosureRecord>,
}

impl KnowledgeBase {
    pub fn new(namespace: impl Into<String>) -> Self {
        Self {
            namespace: namespace.into(),
            ..Self::default()
        }
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn tbox(&self) -> impl Iterator<Item = &TBoxAxiom> {
        self.tbox.iter()
    }

    pub fn rbox(&self) -> impl Iterator<Item = &HornRule> {
        self.rbox.iter()
    }

    pub fn abox(&self) -> impl Iterator<Item = ABoxAssertion> + '_ {
        self.abox
            .iter()
            .map(|(atom, &t)| ABoxAssertion::new(atom.to_atom(), t))
    }

    pub fn asserted_facts(&self) -> impl Iterator<Item = &GroundAtom> {
        self.abox.keys()
    }

    pub fn asserted_at(&self, atom: &GroundAtom) -> Option<Time> {
        self.abox.get(atom).copied()
    }

    pub fn closure(&self, concept: &EntityName) -> Option<&ClosureRecord> {
        self.closures.get(concept)
    }

    pub fn closures(&self) -> impl Iterator<Item = &ClosureRecord> {
        self.closures.values()
    }

    pub fn has_axiom(&self, axiom: &TBoxAxiom) -> bool {
        match axiom.clone().normalized() {
            Ok(a) => self.tbox.contains(&a),
            Err(_) => false,
        }
    }

    /// Copy of this knowledge base with the closure records dropped.
    pub fn without_closures(&self) -> Self {
        Self {
            closures: BTreeMap::new(),
            ..self.clone()
        }
    }

    /// Returns a new knowledge base that also contains `item`.
    pub fn assert(&self, item: impl Into<KbItem>) -> Result<Self, KbError> {
        let mut next = self.clone();
        next.insert(item.into())?;
        Ok(next)
    }

    /// Folds [`assert`](Self::assert) over a sequence of items.
    pub fn assert_all<I>(&self, items: I) -> Result<Self, KbError>
    where
        I: IntoIterator,
        I::Item: Into<KbItem>,
    {
        let mut next = self.clone();
        for item in items {
            next.insert(item.into())?;
        }
        Ok(next)
    }

    fn insert(&mut self, item: KbItem) -> Result<(), KbError> {
        match item {
            KbItem::TBox(axiom) => {
                self.tbox.insert(axiom.normalized()?);
            }
            KbItem::ABox(ABoxAssertion { atom, asserted_at }) => {
                if asserted_at < 0.0 || !asserted_at.is_finite() {
                    return Err(KbError::MalformedItem(format!(
                        "assertion time {asserted_at} for {atom}"
                    )));
                }
                let ground = atom.to_ground().ok_or_else(|| {
                    KbError::MalformedItem(format!("A-Box atom {atom} is not ground"))
                })?;
                self.abox
                    .entry(ground)
                    .and_modify(|t| *t = t.min(asserted_at))
                    .or_insert(asserted_at);
            }
            KbItem::RBox(rule) => {
                rule.validate()?;
                self.rbox.insert(rule);
            }
        }
        Ok(())
    }

    /// Every concept named by an axiom, rule or assertion.
    pub fn concepts(&self) -> BTreeSet<EntityName> {
        let mut out: BTreeSet<EntityName> =
            self.tbox.iter().flat_map(|a| a.concepts()).cloned().collect();
        let rule_atoms = self
            .rbox
            .iter()
            .flat_map(|r| r.body.iter().chain(std::iter::once(&r.head)));
        for atom in rule_atoms {
            if let Atom::Class { concept, .. } = atom {
                out.insert(concept.clone());
            }
        }
        for atom in self.abox.keys() {
            if let GroundAtom::Class { concept, .. } = atom {
                out.insert(concept.clone());
            }
        }
        out
    }

    /// A chainer loaded with this knowledge base's T-Box and R-Box.
    pub fn chainer(&self) -> Chainer<'_> {
        Chainer::new(self.tbox.iter(), self.rbox.iter())
    }

    /// Least fixpoint of the A-Box under the T-Box and R-Box.
    pub fn saturate(&self) -> Saturation {
        self.chainer().saturate(self.abox.keys().cloned())
    }

    pub fn entailed_members(&self, concept: &EntityName) -> BTreeSet<EntityName> {
        self.saturate().members(concept)
    }

    pub fn check_disjointness(&self) -> Vec<Violation> {
        self.check_disjointness_in(&self.saturate())
    }

    pub(crate) fn check_disjointness_in(&self, sat: &Saturation) -> Vec<Violation> {
        let mut out = Vec::new();
        for axiom in &self.tbox {
            if let TBoxAxiom::DisjointClasses { a, b } = axiom {
                let left = sat.members(a);
                for individual in sat.members(b).intersection(&left) {
                    out.push(Violation::Disjoint {
                        individual: individual.clone(),
                        a: a.clone(),
                        b: b.clone(),
                    });
                }
            }
        }
        out.sort();
        out
    }

    /// Universal restrictions are only reported when the filler is closed and
    /// the value is outside the closure; an open filler proves nothing.
    pub fn check_all_values(&self) -> Vec<Violation> {
        let sat = self.saturate();
        let mut out = Vec::new();
        for axiom in &self.tbox {
            let TBoxAxiom::AllValuesFrom {
                class,
                property,
                filler,
            } = axiom
            else {
                continue;
            };
            for individual in sat.members(class) {
                for value in sat.objects(property, &individual) {
                    if self.truth_in(&sat, &value, filler) == Truth::False {
                        out.push(Violation::AllValuesFrom {
                            individual: individual.clone(),
                            class: class.clone(),
                            property: property.clone(),
                            value,
                            filler: filler.clone(),
                        });
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// Records the currently provable extension of `concept` as closed.
    pub fn close_class(&self, concept: &EntityName, now: Time) -> Result<Self, KbError> {
        let members = self.entailed_members(concept);
        self.close_with(concept, members, now)
    }

    pub(crate) fn close_with(
        &self,
        concept: &EntityName,
        members: BTreeSet<EntityName>,
        now: Time,
    ) -> Result<Self, KbError> {
        if let Some(existing) = self.closures.get(concept) {
            if now < existing.closed_at {
                return Err(KbError::ClosureRegression {
                    concept: concept.clone(),
                    now,
                    closed_at: existing.closed_at,
                });
            }
        }
        if !self.concepts().contains(concept) {
            return Err(KbError::UnknownConcept(concept.clone()));
        }
        let mut next = self.clone();
        next.closures.insert(
            concept.clone(),
            ClosureRecord {
                concept: concept.clone(),
                members,
                closed_at: now,
            },
        );
        Ok(next)
    }

    pub fn is_member(&self, individual: &EntityName, concept: &EntityName) -> Truth {
        self.truth_in(&self.saturate(), individual, concept)
    }

    fn truth_in(&self, sat: &Saturation, individual: &EntityName, concept: &EntityName) -> Truth {
        if sat.contains_member(concept, individual) {
            Truth::True
        } else if self.closures.contains_key(concept) {
            // The closure may be stale; entailment above wins, so only a
            // non-entailed individual is reported false.
            Truth::False
        } else {
            Truth::Unknown
        }
    }
}
