//! Temporal entities, the Event/Action/Agent upper ontology, and the
//! lifecycle of obligations (`TEPos`) and prohibitions (`TENeg`) on actions.

use std::fmt;

use thiserror::Error;

use crate::kb::{EntityName, KnowledgeBase, TBoxAxiom, Term, Time, Truth, Violation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemporalError {
    #[error("interval start {start} is after its end {end}")]
    InvertedInterval { start: Time, end: Time },
    #[error("action log is not sorted by occurrence time at index {0}")]
    UnsortedLog(usize),
    #[error("proposition {prop} evaluated at {now}, before its last evaluation at {last}")]
    TimeRegression { prop: String, now: Time, last: Time },
    #[error("upper ontology is missing axioms: {}", .0.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", "))]
    MissingAxiom(Vec<UpperAxiom>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemporalEntity {
    Instant(Time),
    Interval { start: Time, end: Time },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalKind {
    Instant,
    Interval,
}

impl TemporalEntity {
    pub fn interval(start: Time, end: Time) -> Result<Self, TemporalError> {
        if start <= end {
            Ok(TemporalEntity::Interval { start, end })
        } else {
            Err(TemporalError::InvertedInterval { start, end })
        }
    }

    pub fn classify(&self) -> TemporalKind {
        match self {
            TemporalEntity::Instant(_) => TemporalKind::Instant,
            TemporalEntity::Interval { .. } => TemporalKind::Interval,
        }
    }

    /// Closed on both ends.
    pub fn contains(&self, t: Time) -> bool {
        match *self {
            TemporalEntity::Instant(at) => t == at,
            TemporalEntity::Interval { start, end } => start <= t && t <= end,
        }
    }
}

/// A performed action. `target` names the (local, external) ontologies a
/// merge action touched.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub action_id: String,
    pub actor: EntityName,
    pub action_kind: EntityName,
    pub occurred_at: Time,
    pub target: Option<(String, String)>,
}

impl ActionRecord {
    /// The actor must be provably an `agent_class` member in `kb`.
    pub fn actor_is_agent(&self, kb: &KnowledgeBase, agent_class: &EntityName) -> bool {
        kb.is_member(&self.actor, agent_class) == Truth::True
    }
}

/// Matches action records by kind, optional target, and actor. A variable
/// actor matches anyone.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionPattern {
    pub action_kind: EntityName,
    pub target: Option<(String, String)>,
    pub actor: Term,
}

impl ActionPattern {
    pub fn kind(action_kind: EntityName) -> Self {
        Self {
            action_kind,
            target: None,
            actor: Term::var("agent"),
        }
    }

    pub fn matches(&self, record: &ActionRecord) -> bool {
        record.action_kind == self.action_kind
            && self
                .target
                .as_ref()
                .is_none_or(|t| record.target.as_ref() == Some(t))
            && match &self.actor {
                Term::Variable(_) => true,
                Term::Individual(who) => *who == record.actor,
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// Obligation: a matching action must happen inside the interval.
    TEPos,
    /// Prohibition: no matching action may happen inside the interval.
    TENeg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropState {
    Pending,
    Fulfilled,
    Violated,
}

impl PropState {
    pub fn is_terminal(self) -> bool {
        self != PropState::Pending
    }
}

impl fmt::Display for PropState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PropState::Pending => "Pending",
            PropState::Fulfilled => "Fulfilled",
            PropState::Violated => "Violated",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalProposition {
    pub prop_id: String,
    pub polarity: Polarity,
    start: Time,
    end: Time,
    pub pattern: ActionPattern,
    pub state: PropState,
    last_evaluated: Option<Time>,
}

impl TemporalProposition {
    pub fn new(
        prop_id: impl Into<String>,
        polarity: Polarity,
        start: Time,
        end: Time,
        pattern: ActionPattern,
    ) -> Result<Self, TemporalError> {
        TemporalEntity::interval(start, end)?;
        Ok(Self {
            prop_id: prop_id.into(),
            polarity,
            start,
            end,
            pattern,
            state: PropState::Pending,
            last_evaluated: None,
        })
    }

    pub fn interval(&self) -> TemporalEntity {
        TemporalEntity::Interval {
            start: self.start,
            end: self.end,
        }
    }

    /// Advances the proposition to `now` given the sorted action log.
    pub fn step(&self, log: &[ActionRecord], now: Time) -> Result<Self, TemporalError> {
        if let Some(i) = log
            .windows(2)
            .position(|w| w[1].occurred_at < w[0].occurred_at)
        {
            return Err(TemporalError::UnsortedLog(i + 1));
        }
        if let Some(last) = self.last_evaluated {
            if now < last {
                return Err(TemporalError::TimeRegression {
                    prop: self.prop_id.clone(),
                    now,
                    last,
                });
            }
        }
        let mut next = self.clone();
        next.last_evaluated = Some(now);
        if self.state.is_terminal() {
            return Ok(next);
        }
        let horizon = now.min(self.end);
        let hit = log.iter().any(|a| {
            self.start <= a.occurred_at && a.occurred_at <= horizon && self.pattern.matches(a)
        });
        next.state = match (self.polarity, hit, now > self.end) {
            (Polarity::TEPos, true, _) => PropState::Fulfilled,
            (Polarity::TEPos, false, true) => PropState::Violated,
            (Polarity::TENeg, true, _) => PropState::Violated,
            (Polarity::TENeg, false, true) => PropState::Fulfilled,
            (_, false, false) => PropState::Pending,
        };
        Ok(next)
    }
}

/// The structural axioms every upper ontology must carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpperAxiom {
    ActionSubEvent,
    EventAgentDisjoint,
    TemporalEntityUnion,
}

impl fmt::Display for UpperAxiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpperAxiom::ActionSubEvent => "Action ⊆ Event",
            UpperAxiom::EventAgentDisjoint => "Event ⊓ Agent ⊆ ⊥",
            UpperAxiom::TemporalEntityUnion => "TemporalEntity ≡ Instant ⊔ Interval",
        })
    }
}

/// Upper-ontology class names in the knowledge base's own namespace.
pub struct UpperVocabulary {
    pub event: EntityName,
    pub action: EntityName,
    pub agent: EntityName,
    pub temporal_entity: EntityName,
    pub instant: EntityName,
    pub interval: EntityName,
}

impl UpperVocabulary {
    pub fn in_namespace(ns: &str) -> Self {
        let n = |s: &str| EntityName::new(ns, s).expect("static upper ontology names are tokens");
        Self {
            event: n("Event"),
            action: n("Action"),
            agent: n("Agent"),
            temporal_entity: n("TemporalEntity"),
            instant: n("Instant"),
            interval: n("Interval"),
        }
    }

    pub fn axioms(&self) -> [(UpperAxiom, TBoxAxiom); 3] {
        [
            (
                UpperAxiom::ActionSubEvent,
                TBoxAxiom::SubClassOf {
                    sub: self.action.clone(),
                    sup: self.event.clone(),
                },
            ),
            (
                UpperAxiom::EventAgentDisjoint,
                TBoxAxiom::DisjointClasses {
                    a: self.event.clone(),
                    b: self.agent.clone(),
                },
            ),
            (
                UpperAxiom::TemporalEntityUnion,
                TBoxAxiom::UnionEquivalence {
                    whole: self.temporal_entity.clone(),
                    parts: vec![self.instant.clone(), self.interval.clone()],
                },
            ),
        ]
    }
}

pub fn validate_upper_ontology(kb: &KnowledgeBase) -> Result<Vec<Violation>, TemporalError> {
    let vocab = UpperVocabulary::in_namespace(kb.namespace());
    let missing: Vec<UpperAxiom> = vocab
        .axioms()
        .into_iter()
        .filter(|(_, axiom)| !kb.has_axiom(axiom))
        .map(|(tag, _)| tag)
        .collect();
    if !missing.is_empty() {
        return Err(TemporalError::MissingAxiom(missing));
    }
    Ok(kb.check_disjointness())
}
