//! Generators and checks for temporal propositions, shared by the property
//! tests and the acceptance run.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::{ind, name};
use ontoflux::kb::Term;
use ontoflux::temporal::{ActionPattern, ActionRecord, Polarity, PropState, TemporalProposition};

/// Quarter-unit times in [0, 10].
pub fn time() -> impl Strategy<Value = f64> {
    (0u32..=40).prop_map(|q| f64::from(q) / 4.0)
}

pub fn record() -> impl Strategy<Value = ActionRecord> {
    (0usize..2, 0usize..2, time()).prop_map(|(kind, actor, t)| ActionRecord {
        action_id: String::new(),
        actor: ind(["server", "auditor"][actor]),
        action_kind: name("O", ["Merge", "Review"][kind]),
        occurred_at: t,
        target: None,
    })
}

pub fn log() -> impl Strategy<Value = Vec<ActionRecord>> {
    prop::collection::vec(record(), 0..=6).prop_map(|mut log| {
        log.sort_by(|a, b| a.occurred_at.total_cmp(&b.occurred_at));
        for (i, r) in log.iter_mut().enumerate() {
            r.action_id = format!("a{i}");
        }
        log
    })
}

pub fn pattern() -> impl Strategy<Value = ActionPattern> {
    prop_oneof![Just(None), Just(Some("server")), Just(Some("auditor"))].prop_map(|actor| {
        let mut p = ActionPattern::kind(name("O", "Merge"));
        if let Some(a) = actor {
            p.actor = Term::Individual(ind(a));
        }
        p
    })
}

pub fn interval() -> impl Strategy<Value = (f64, f64)> {
    (time(), time()).prop_map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
}

/// The state the definition assigns after observing `log` up to `now`.
pub fn expected(polarity: Polarity, start: f64, end: f64, pattern: &ActionPattern, log: &[ActionRecord], now: f64) -> PropState {
    let hit = log
        .iter()
        .any(|a| pattern.matches(a) && start <= a.occurred_at && a.occurred_at <= now.min(end));
    match (polarity, hit) {
        (Polarity::TEPos, true) => PropState::Fulfilled,
        (Polarity::TENeg, true) => PropState::Violated,
        (Polarity::TEPos, false) if now > end => PropState::Violated,
        (Polarity::TENeg, false) if now > end => PropState::Fulfilled,
        _ => PropState::Pending,
    }
}

fn polarity(positive: bool) -> Polarity {
    if positive {
        Polarity::TEPos
    } else {
        Polarity::TENeg
    }
}

/// Stepping at increasing times follows the definition until the state is
/// terminal, and never leaves it afterwards.
pub fn check_definition_and_monotonicity(
    log: &[ActionRecord],
    (start, end): (f64, f64),
    pattern: &ActionPattern,
    mut nows: Vec<f64>,
    positive: bool,
) -> Result<(), TestCaseError> {
    nows.sort_by(f64::total_cmp);
    let polarity = polarity(positive);
    let mut p = TemporalProposition::new("p", polarity, start, end, pattern.clone()).unwrap();
    let mut terminal: Option<PropState> = None;
    for &now in &nows {
        // Only actions that have happened by `now` are visible.
        let seen: Vec<ActionRecord> = log.iter().filter(|a| a.occurred_at <= now).cloned().collect();
        p = p.step(&seen, now).unwrap();
        if let Some(t) = terminal {
            prop_assert_eq!(p.state, t);
        } else {
            prop_assert_eq!(p.state, expected(polarity, start, end, pattern, &seen, now));
            if p.state.is_terminal() {
                terminal = Some(p.state);
            }
        }
    }
    Ok(())
}

/// Swapping the polarity swaps Fulfilled and Violated.
pub fn check_duality(
    log: &[ActionRecord],
    (start, end): (f64, f64),
    pattern: &ActionPattern,
    now: f64,
) -> Result<(), TestCaseError> {
    let pos = TemporalProposition::new("p", Polarity::TEPos, start, end, pattern.clone()).unwrap();
    let neg = TemporalProposition::new("n", Polarity::TENeg, start, end, pattern.clone()).unwrap();
    let a = pos.step(log, now).unwrap().state;
    let b = neg.step(log, now).unwrap().state;
    let flipped = match a {
        PropState::Pending => PropState::Pending,
        PropState::Fulfilled => PropState::Violated,
        PropState::Violated => PropState::Fulfilled,
    };
    prop_assert_eq!(b, flipped);
    Ok(())
}

/// Intermediate evaluations and the order of simultaneous actions do not
/// change the final state.
pub fn check_order_independence(
    log: &[ActionRecord],
    (start, end): (f64, f64),
    pattern: &ActionPattern,
    mut nows: Vec<f64>,
    positive: bool,
    rotate: usize,
) -> Result<(), TestCaseError> {
    nows.sort_by(f64::total_cmp);
    let fresh = TemporalProposition::new("p", polarity(positive), start, end, pattern.clone()).unwrap();
    let last = *nows.last().unwrap();
    let direct = fresh.step(log, last).unwrap();
    let mut stepped = fresh.clone();
    for &now in &nows {
        stepped = stepped.step(log, now).unwrap();
    }
    prop_assert_eq!(stepped.state, direct.state);

    let mut shuffled = log.to_vec();
    for group in shuffled.chunk_by_mut(|a, b| a.occurred_at == b.occurred_at) {
        let k = rotate % group.len();
        group.rotate_left(k);
    }
    prop_assert_eq!(fresh.step(&shuffled, last).unwrap().state, direct.state);
    Ok(())
}
