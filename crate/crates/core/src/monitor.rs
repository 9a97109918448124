//! The tick-driven monitoring loop.
//!
//! Each tick moves the clock from `t` to `t + 1` in five sub-steps:
//!
//! - a: drain queued inputs stamped in `(t, t + 1]` into the A-Box
//! - b: saturate the knowledge base and step the temporal propositions
//! - c: accept mappings under the merge policy and merge the external facts
//! - d: re-close the configured concepts
//! - e: advance the clock
//!
//! Every observable effect is written to an append-only event log. Drained
//! inputs are logged in script syntax, so the log alone (with the initial
//! knowledge base, configuration and merge inputs) replays the run.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::des::UpdateOrder;
use crate::io::{format_input, parse_item, IoError, ScriptItem};
use crate::kb::{ABoxAssertion, Atom, EntityName, GroundAtom, KbError, KnowledgeBase, Time};
use crate::merge::{merge, Mapping, MergeError, Provenance};
use crate::temporal::{ActionRecord, TemporalError, TemporalProposition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("input at {at} is not after the processed tick {clock}")]
    StaleEvent { at: Time, clock: u64 },
    #[error("acceptance threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Temporal(#[from] TemporalError),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error("log line {line}: {message}")]
    Replay { line: usize, message: String },
}

/// Something that happens between ticks.
#[derive(Debug, Clone, PartialEq)]
pub enum MonitorInput {
    Assertion(ABoxAssertion),
    Action(ActionRecord),
}

impl MonitorInput {
    pub fn time(&self) -> Time {
        match self {
            MonitorInput::Assertion(a) => a.asserted_at,
            MonitorInput::Action(a) => a.occurred_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonitorConfig {
    pub closed_concepts: Vec<EntityName>,
    pub propositions: Vec<TemporalProposition>,
}

/// Accepts every mapping whose probability reaches the threshold. Accepted
/// mappings are ordered by probability (descending), then id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergePolicy {
    acceptance_threshold: f64,
}

impl MergePolicy {
    pub fn new(acceptance_threshold: f64) -> Result<Self, MonitorError> {
        if (0.0..=1.0).contains(&acceptance_threshold) {
            Ok(Self { acceptance_threshold })
        } else {
            Err(MonitorError::InvalidThreshold(acceptance_threshold))
        }
    }

    pub fn threshold(&self) -> f64 {
        self.acceptance_threshold
    }

    pub fn select<'m>(&self, mappings: &'m [Mapping]) -> Vec<&'m Mapping> {
        let mut accepted: Vec<&Mapping> = mappings
            .iter()
            .filter(|m| m.probability >= self.acceptance_threshold)
            .collect();
        accepted.sort_by(|a, b| {
            b.probability
                .total_cmp(&a.probability)
                .then_with(|| a.mapping_id.cmp(&b.mapping_id))
        });
        accepted
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedMerge {
    pub mapping_id: String,
    pub local_concept: EntityName,
    pub external_concept: EntityName,
    pub probability: f64,
}

impl fmt::Display for AcceptedMerge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} <- {} p={:.9}",
            self.mapping_id, self.local_concept, self.external_concept, self.probability
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub tick: u64,
    pub step: char,
    pub detail: String,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tick={} step={} detail={}", self.tick, self.step, self.detail)
    }
}

impl FromStr for LogEntry {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let bad = || format!("malformed log line `{line}`");
        let rest = line.strip_prefix("tick=").ok_or_else(bad)?;
        let (tick, rest) = rest.split_once(" step=").ok_or_else(bad)?;
        let (step, detail) = rest.split_once(" detail=").ok_or_else(bad)?;
        let mut chars = step.chars();
        let step = match (chars.next(), chars.next()) {
            (Some(c @ 'a'..='e'), None) => c,
            _ => return Err(bad()),
        };
        Ok(LogEntry {
            tick: tick.parse().map_err(|_| bad())?,
            step,
            detail: detail.to_string(),
        })
    }
}

/// Parses a whole log, one entry per non-empty line.
pub fn parse_log(text: &str) -> Result<Vec<LogEntry>, MonitorError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            l.parse().map_err(|message| MonitorError::Replay {
                line: i + 1,
                message,
            })
        })
        .collect()
}

const DRAIN: &str = "drain ";

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorState {
    clock: u64,
    kb: KnowledgeBase,
    pending: VecDeque<MonitorInput>,
    merge_relation: Vec<AcceptedMerge>,
    /// Facts obtained only through accepted mappings, with probabilities.
    derived: BTreeMap<GroundAtom, f64>,
    closed_concepts: Vec<EntityName>,
    propositions: Vec<TemporalProposition>,
    action_log: Vec<ActionRecord>,
    event_log: Vec<LogEntry>,
}

impl MonitorState {
    /// Starts monitoring at time 0 and closes every configured concept.
    pub fn init(kb: KnowledgeBase, config: &MonitorConfig) -> Result<Self, MonitorError> {
        let mut state = Self {
            clock: 0,
            kb,
            pending: VecDeque::new(),
            merge_relation: Vec::new(),
            derived: BTreeMap::new(),
            closed_concepts: config.closed_concepts.clone(),
            propositions: config.propositions.clone(),
            action_log: Vec::new(),
            event_log: Vec::new(),
        };
        for concept in &config.closed_concepts {
            state.kb = state.kb.close_class(concept, 0.0)?;
            state.log_closure(0, concept);
        }
        Ok(state)
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn pending(&self) -> impl Iterator<Item = &MonitorInput> {
        self.pending.iter()
    }

    pub fn merge_relation(&self) -> &[AcceptedMerge] {
        &self.merge_relation
    }

    pub fn derived(&self) -> &BTreeMap<GroundAtom, f64> {
        &self.derived
    }

    pub fn propositions(&self) -> &[TemporalProposition] {
        &self.propositions
    }

    pub fn action_log(&self) -> &[ActionRecord] {
        &self.action_log
    }

    pub fn event_log(&self) -> &[LogEntry] {
        &self.event_log
    }

    /// The event log, one line per entry.
    pub fn log_text(&self) -> String {
        self.event_log.iter().map(|e| format!("{e}\n")).collect()
    }

    fn push(&mut self, tick: u64, step: char, detail: String) {
        self.event_log.push(LogEntry { tick, step, detail });
    }

    fn log_closure(&mut self, tick: u64, concept: &EntityName) {
        let size = self.kb.closure(concept).map_or(0, |c| c.members.len());
        self.push(tick, 'd', format!("close {concept} members={size}"));
    }

    pub fn enqueue(&self, input: MonitorInput) -> Result<Self, MonitorError> {
        let at = input.time();
        if at.is_nan() || at <= self.clock as Time {
            return Err(MonitorError::StaleEvent { at, clock: self.clock });
        }
        if let MonitorInput::Assertion(a) = &input {
            if !a.atom.is_ground() {
                return Err(KbError::MalformedItem(format!("A-Box atom {} is not ground", a.atom)).into());
            }
        }
        let mut next = self.clone();
        next.pending.push_back(input);
        Ok(next)
    }

    pub fn enqueue_event(&self, assertion: ABoxAssertion) -> Result<Self, MonitorError> {
        self.enqueue(MonitorInput::Assertion(assertion))
    }

    pub fn enqueue_action(&self, action: ActionRecord) -> Result<Self, MonitorError> {
        self.enqueue(MonitorInput::Action(action))
    }

    fn actor_property(&self) -> Result<EntityName, KbError> {
        EntityName::new(self.kb.namespace(), "actor")
    }

    pub fn tick(
        &self,
        policy: &MergePolicy,
        mappings: &[Mapping],
        external: &KnowledgeBase,
    ) -> Result<Self, MonitorError> {
        let mut s = self.clone();
        let tick = s.clock + 1;
        let now = tick as Time;
        let ns = s.kb.namespace().to_string();

        // a
        let (mut due, rest): (Vec<MonitorInput>, Vec<MonitorInput>) =
            s.pending.drain(..).partition(|i| i.time() <= now);
        s.pending = rest.into();
        due.sort_by(|x, y| x.time().total_cmp(&y.time()));
        for input in due {
            s.push(tick, 'a', format!("{DRAIN}{}", format_input(&input, &ns)));
            match input {
                MonitorInput::Assertion(a) => s.kb = s.kb.assert(a)?,
                MonitorInput::Action(a) => {
                    let id = EntityName::global(a.action_id.clone())?;
                    let t = a.occurred_at;
                    s.kb = s
                        .kb
                        .assert(ABoxAssertion::new(Atom::class(a.action_kind.clone(), id.clone()), t))?
                        .assert(ABoxAssertion::new(
                            Atom::property(s.actor_property()?, id, a.actor.clone()),
                            t,
                        ))?;
                    s.action_log.push(a);
                }
            }
        }

        // b
        let saturation = s.kb.saturate();
        let previous = std::mem::take(&mut s.propositions);
        for p in previous {
            let next = p.step(&s.action_log, now)?;
            if next.state != p.state {
                s.push(tick, 'b', format!("prop {} {} -> {}", p.prop_id, p.state, next.state));
            }
            s.propositions.push(next);
        }

        // c
        let accepted = policy.select(mappings);
        let relation: Vec<AcceptedMerge> = accepted
            .iter()
            .map(|m| AcceptedMerge {
                mapping_id: m.mapping_id.clone(),
                local_concept: m.target.predicate().name().clone(),
                external_concept: m.source.predicate().name().clone(),
                probability: m.probability,
            })
            .collect();
        let released: Vec<String> = s
            .merge_relation
            .iter()
            .filter(|r| !relation.contains(r))
            .map(|r| format!("release {r}"))
            .collect();
        for detail in released {
            s.push(tick, 'c', detail);
        }
        for new in relation.iter().filter(|r| !self.merge_relation.contains(r)) {
            s.push(tick, 'c', format!("accept {new}"));
        }
        s.merge_relation = relation;
        let derived: BTreeMap<GroundAtom, f64> = if accepted.is_empty() {
            BTreeMap::new()
        } else {
            let chosen: Vec<Mapping> = accepted.into_iter().cloned().collect();
            merge(&s.kb, external, &chosen)?
                .derived()
                .filter(|f| f.provenance != Provenance::Local)
                .map(|f| (f.atom.clone(), f.probability))
                .collect()
        };
        if derived != s.derived {
            s.push(tick, 'c', format!("derived {} mapped facts", derived.len()));
            s.derived = derived;
        }

        // d
        for concept in s.closed_concepts.clone() {
            s.kb = s.kb.close_with(&concept, saturation.members(&concept), now)?;
            s.log_closure(tick, &concept);
        }

        // e
        s.clock = tick;
        s.push(tick, 'e', format!("clock {tick}"));
        log::debug!("tick {tick}: {} facts, {} pending", saturation.len(), s.pending.len());
        Ok(s)
    }

    pub fn run(
        &self,
        horizon: u64,
        policy: &MergePolicy,
        mappings: &[Mapping],
        external: &KnowledgeBase,
    ) -> Result<Self, MonitorError> {
        let mut s = self.clone();
        for _ in 0..horizon {
            s = s.tick(policy, mappings, external)?;
        }
        Ok(s)
    }

    /// Rebuilds a run from its event log: the inputs drained at each tick
    /// are re-enqueued just before that tick. Inputs that were still queued
    /// when the log ended are not recoverable and are absent from the result.
    pub fn replay(
        kb: KnowledgeBase,
        config: &MonitorConfig,
        log: &[LogEntry],
        policy: &MergePolicy,
        mappings: &[Mapping],
        external: &KnowledgeBase,
    ) -> Result<Self, MonitorError> {
        let mut s = Self::init(kb, config)?;
        let ns = s.kb.namespace().to_string();
        let last = log.iter().map(|e| e.tick).max().unwrap_or(0);
        let mut entries = log.iter().enumerate().peekable();
        for tick in 1..=last {
            while let Some((i, e)) = entries.peek() {
                if e.tick > tick {
                    break;
                }
                if e.step == 'a' {
                    let statement = e.detail.strip_prefix(DRAIN).ok_or_else(|| MonitorError::Replay {
                        line: i + 1,
                        message: format!("unexpected step a detail `{}`", e.detail),
                    })?;
                    let input = match parse_item(statement, i + 1, &ns) {
                        Ok(ScriptItem::Input(input)) => input,
                        Ok(_) => {
                            return Err(MonitorError::Replay {
                                line: i + 1,
                                message: "drained entry is not an input".into(),
                            })
                        }
                        Err(e) => return Err(replay_error(i + 1, e)),
                    };
                    s = s.enqueue(input)?;
                }
                entries.next();
            }
            s = s.tick(policy, mappings, external)?;
        }
        Ok(s)
    }

    /// Whether every configured closure matches the current entailment and
    /// was taken at the current clock.
    pub fn closures_fresh(&self) -> bool {
        let saturation = self.kb.saturate();
        self.closed_concepts.iter().all(|c| {
            self.kb.closure(c).is_some_and(|record| {
                record.closed_at == self.clock as Time && record.members == saturation.members(c)
            })
        })
    }
}

fn replay_error(line: usize, e: IoError) -> MonitorError {
    MonitorError::Replay {
        line,
        message: e.to_string(),
    }
}

/// One action per delivered order, stamped at its delivery time, with ids
/// `merge_<seq>`.
pub fn delivery_actions(
    orders: &[UpdateOrder],
    action_kind: &EntityName,
    actor: &EntityName,
    target: Option<(String, String)>,
) -> Vec<ActionRecord> {
    orders
        .iter()
        .filter(|o| o.effective_delivery.is_finite())
        .map(|o| ActionRecord {
            action_id: format!("merge_{}", o.seq),
            actor: actor.clone(),
            action_kind: action_kind.clone(),
            occurred_at: o.effective_delivery,
            target: target.clone(),
        })
        .collect()
}
