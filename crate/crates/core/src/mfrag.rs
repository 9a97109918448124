//! Structural validation of MEBN fragments `F = (E, A, N, G, D)` and of
//! theories built from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub type NodeId = String;

/// Sum tolerance for a probability row.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalDistribution {
    pub agent_node: NodeId,
    /// Conditioning parents, in the column order of the row keys.
    pub parents: Vec<NodeId>,
    /// Parent-state combination → probabilities over the node's values.
    pub rows: BTreeMap<Vec<String>, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MFrag {
    pub name: String,
    pub events: BTreeSet<NodeId>,
    pub actions: BTreeSet<NodeId>,
    pub agents: BTreeSet<NodeId>,
    pub edges: BTreeSet<(NodeId, NodeId)>,
    pub distributions: BTreeMap<NodeId, LocalDistribution>,
    pub action_instance_of: BTreeMap<NodeId, NodeId>,
    pub possible_values: BTreeMap<NodeId, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum StructuralError {
    DisjointnessViolated(NodeId),
    UnknownNode(NodeId),
    CycleDetected(Vec<NodeId>),
    RootNotActionOrAgent(NodeId),
    ActionNotRoot(NodeId),
    MissingDistribution(NodeId),
    UnexpectedDistribution(NodeId),
    ParentMismatch {
        node: NodeId,
        declared: Vec<NodeId>,
        graph: Vec<NodeId>,
    },
    RowArity {
        node: NodeId,
        row: Vec<String>,
        expected: usize,
        found: usize,
    },
    ProbabilityOutOfRange {
        node: NodeId,
        row: Vec<String>,
    },
    RowSumMismatch {
        node: NodeId,
        row: Vec<String>,
    },
    UncoveredParentCombination {
        node: NodeId,
        combination: Vec<String>,
    },
    UnknownParentCombination {
        node: NodeId,
        combination: Vec<String>,
    },
    MissingActionInstance(NodeId),
    UnexpectedActionInstance(NodeId),
    MissingPossibleValues(NodeId),
    DuplicateHome {
        rv: NodeId,
        fragments: Vec<String>,
    },
    InFragment {
        fragment: String,
        error: Box<StructuralError>,
    },
}

impl StructuralError {
    /// The variant name, as printed by the `validate` command.
    pub fn kind(&self) -> &'static str {
        match self {
            StructuralError::DisjointnessViolated(_) => "DisjointnessViolated",
            StructuralError::UnknownNode(_) => "UnknownNode",
            StructuralError::CycleDetected(_) => "CycleDetected",
            StructuralError::RootNotActionOrAgent(_) => "RootNotActionOrAgent",
            StructuralError::ActionNotRoot(_) => "ActionNotRoot",
            StructuralError::MissingDistribution(_) => "MissingDistribution",
            StructuralError::UnexpectedDistribution(_) => "UnexpectedDistribution",
            StructuralError::ParentMismatch { .. } => "ParentMismatch",
            StructuralError::RowArity { .. } => "RowArity",
            StructuralError::ProbabilityOutOfRange { .. } => "ProbabilityOutOfRange",
            StructuralError::RowSumMismatch { .. } => "RowSumMismatch",
            StructuralError::UncoveredParentCombination { .. } => "UncoveredParentCombination",
            StructuralError::UnknownParentCombination { .. } => "UnknownParentCombination",
            StructuralError::MissingActionInstance(_) => "MissingActionInstance",
            StructuralError::UnexpectedActionInstance(_) => "UnexpectedActionInstance",
            StructuralError::MissingPossibleValues(_) => "MissingPossibleValues",
            StructuralError::DuplicateHome { .. } => "DuplicateHome",
            StructuralError::InFragment { error, .. } => error.kind(),
        }
    }
}

impl fmt::Display for StructuralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use StructuralError::*;
        match self {
            DisjointnessViolated(n) => write!(f, "DisjointnessViolated: {n} is in more than one of E, A, N"),
            UnknownNode(n) => write!(f, "UnknownNode: {n} is referenced but not declared"),
            CycleDetected(ns) => write!(f, "CycleDetected: {}", ns.join(" -> ")),
            RootNotActionOrAgent(n) => write!(f, "RootNotActionOrAgent: root {n} is an event"),
            ActionNotRoot(n) => write!(f, "ActionNotRoot: action {n} has parents"),
            MissingDistribution(n) => write!(f, "MissingDistribution: agent {n}"),
            UnexpectedDistribution(n) => write!(f, "UnexpectedDistribution: {n} is not an agent"),
            ParentMismatch { node, declared, graph } => write!(
                f,
                "ParentMismatch: {node} declares [{}] but the graph has [{}]",
                declared.join(", "),
                graph.join(", ")
            ),
            RowArity { node, row, expected, found } => write!(
                f,
                "RowArity: {node} row ({}) has {found} entries, expected {expected}",
                row.join(", ")
            ),
            ProbabilityOutOfRange { node, row } => {
                write!(f, "ProbabilityOutOfRange: {node} row ({})", row.join(", "))
            }
            RowSumMismatch { node, row } => write!(f, "RowSumMismatch: {node} row ({})", row.join(", ")),
            UncoveredParentCombination { node, combination } => write!(
                f,
                "UncoveredParentCombination: {node} has no row for ({})",
                combination.join(", ")
            ),
            UnknownParentCombination { node, combination } => write!(
                f,
                "UnknownParentCombination: {node} row ({}) is not a parent state",
                combination.join(", ")
            ),
            MissingActionInstance(n) => write!(f, "MissingActionInstance: action {n}"),
            UnexpectedActionInstance(n) => write!(f, "UnexpectedActionInstance: {n} is not an action"),
            MissingPossibleValues(n) => write!(f, "MissingPossibleValues: {n}"),
            DuplicateHome { rv, fragments } => {
                write!(f, "DuplicateHome: {rv} is defined in {}", fragments.join(", "))
            }
            InFragment { fragment, error } => write!(f, "{fragment}: {error}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MfragError {
    #[error("invalid fragment: {} structural errors", .0.len())]
    InvalidFragment(Vec<StructuralError>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragmentKind {
    /// Class-level regularities (T-Box analog).
    Generative,
    /// Pins values of a concrete situation (A-Box analog).
    Finding,
}

impl MFrag {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn nodes(&self) -> BTreeSet<&NodeId> {
        self.events
            .iter()
            .chain(&self.actions)
            .chain(&self.agents)
            .collect()
    }

    fn parents_of(&self, node: &str) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter(|(_, to)| to == node)
            .map(|(from, _)| from.clone())
            .collect()
    }

    /// Nodes in an order compatible with the edges, or `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let (order, rest) = self.kahn();
        rest.is_empty().then_some(order)
    }

    fn kahn(&self) -> (Vec<NodeId>, BTreeSet<NodeId>) {
        let mut nodes: BTreeSet<NodeId> = self.nodes().into_iter().cloned().collect();
        for (a, b) in &self.edges {
            nodes.insert(a.clone());
            nodes.insert(b.clone());
        }
        let mut indegree: BTreeMap<&NodeId, usize> = nodes.iter().map(|n| (n, 0)).collect();
        for (_, to) in &self.edges {
            *indegree.get_mut(to).expect("edge endpoints are in the node set") += 1;
        }
        let mut ready: Vec<&NodeId> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(n, _)| *n)
            .collect();
        let mut order = Vec::new();
        while let Some(n) = ready.pop() {
            order.push(n.clone());
            for (_, to) in self.edges.iter().filter(|(from, _)| from == n) {
                let d = indegree.get_mut(to).expect("known node");
                *d -= 1;
                if *d == 0 {
                    ready.push(to);
                }
            }
        }
        let placed: BTreeSet<&NodeId> = order.iter().collect();
        let rest = nodes.iter().filter(|n| !placed.contains(n)).cloned().collect();
        (order, rest)
    }

    /// Strongly connected components among `candidates` that contain a cycle.
    fn cycles(&self, candidates: &BTreeSet<NodeId>) -> Vec<Vec<NodeId>> {
        let reach = |start: &NodeId| -> BTreeSet<NodeId> {
            let mut seen = BTreeSet::new();
            let mut stack = vec![start.clone()];
            while let Some(n) = stack.pop() {
                for (_, to) in self.edges.iter().filter(|(from, _)| *from == n) {
                    if seen.insert(to.clone()) {
                        stack.push(to.clone());
                    }
                }
            }
            seen
        };
        let reaches: BTreeMap<&NodeId, BTreeSet<NodeId>> =
            candidates.iter().map(|n| (n, reach(n))).collect();
        let mut assigned = BTreeSet::new();
        let mut out = Vec::new();
        for n in candidates {
            if assigned.contains(n) || !reaches[n].contains(n) {
                continue;
            }
            let component: Vec<NodeId> = candidates
                .iter()
                .filter(|m| reaches[n].contains(*m) && reaches[*m].contains(n))
                .cloned()
                .collect();
            assigned.extend(component.iter().cloned());
            out.push(component);
        }
        out
    }

    /// Every structural defect, sorted. Empty iff the fragment is valid.
    pub fn validate(&self) -> Vec<StructuralError> {
        use StructuralError::*;
        let mut errors = BTreeSet::new();
        let declared = self.nodes();

        for node in &declared {
            let memberships = [&self.events, &self.actions, &self.agents]
                .iter()
                .filter(|set| set.contains(*node))
                .count();
            if memberships > 1 {
                errors.insert(DisjointnessViolated((*node).clone()));
            }
        }

        for (from, to) in &self.edges {
            for end in [from, to] {
                if !declared.contains(end) {
                    errors.insert(UnknownNode(end.clone()));
                }
            }
        }

        let (_, cyclic) = self.kahn();
        for component in self.cycles(&cyclic) {
            errors.insert(CycleDetected(component));
        }

        // Roots only mean something in a DAG.
        if cyclic.is_empty() {
            for node in &declared {
                let has_parent = self.edges.iter().any(|(_, to)| to == *node);
                if !has_parent && !self.actions.contains(*node) && !self.agents.contains(*node) {
                    errors.insert(RootNotActionOrAgent((*node).clone()));
                }
                if has_parent && self.actions.contains(*node) {
                    errors.insert(ActionNotRoot((*node).clone()));
                }
            }
        }

        for node in &declared {
            if self.possible_values.get(*node).is_none_or(Vec::is_empty) {
                errors.insert(MissingPossibleValues((*node).clone()));
            }
        }

        for agent in &self.agents {
            if !self.distributions.contains_key(agent) {
                errors.insert(MissingDistribution(agent.clone()));
            }
        }
        for (node, dist) in &self.distributions {
            if !self.agents.contains(node) || dist.agent_node != *node {
                errors.insert(UnexpectedDistribution(node.clone()));
                continue;
            }
            self.check_distribution(node, dist, &mut errors);
        }

        for action in &self.actions {
            if !self.action_instance_of.contains_key(action) {
                errors.insert(MissingActionInstance(action.clone()));
            }
        }
        for (node, of) in &self.action_instance_of {
            if !self.actions.contains(node) {
                errors.insert(UnexpectedActionInstance(node.clone()));
            }
            if !declared.contains(of) {
                errors.insert(UnknownNode(of.clone()));
            }
        }

        errors.into_iter().collect()
    }

    fn check_distribution(
        &self,
        node: &NodeId,
        dist: &LocalDistribution,
        errors: &mut BTreeSet<StructuralError>,
    ) {
        use StructuralError::*;
        let mut graph_parents = self.parents_of(node);
        graph_parents.sort();
        let mut declared_parents = dist.parents.clone();
        declared_parents.sort();
        if graph_parents != declared_parents {
            errors.insert(ParentMismatch {
                node: node.clone(),
                declared: dist.parents.clone(),
                graph: graph_parents,
            });
            return;
        }

        let arity = self.possible_values.get(node).map_or(0, Vec::len);
        for (row, probs) in &dist.rows {
            if probs.len() != arity {
                errors.insert(RowArity {
                    node: node.clone(),
                    row: row.clone(),
                    expected: arity,
                    found: probs.len(),
                });
            }
            if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                errors.insert(ProbabilityOutOfRange {
                    node: node.clone(),
                    row: row.clone(),
                });
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                errors.insert(RowSumMismatch {
                    node: node.clone(),
                    row: row.clone(),
                });
            }
        }

        let mut combinations: Vec<Vec<String>> = vec![vec![]];
        for parent in &dist.parents {
            let values = self.possible_values.get(parent).cloned().unwrap_or_default();
            combinations = combinations
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push(v.clone());
                        c
                    })
                })
                .collect();
        }
        let expected: BTreeSet<Vec<String>> = combinations.into_iter().collect();
        for combination in expected.iter().filter(|c| !dist.rows.contains_key(*c)) {
            errors.insert(UncoveredParentCombination {
                node: node.clone(),
                combination: combination.clone(),
            });
        }
        for combination in dist.rows.keys().filter(|c| !expected.contains(*c)) {
            errors.insert(UnknownParentCombination {
                node: node.clone(),
                combination: combination.clone(),
            });
        }
    }

    pub fn classify(&self, has_findings: bool) -> Result<FragmentKind, MfragError> {
        let errors = self.validate();
        if !errors.is_empty() {
            return Err(MfragError::InvalidFragment(errors));
        }
        Ok(if has_findings {
            FragmentKind::Finding
        } else {
            FragmentKind::Generative
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MTheory {
    pub fragments: Vec<MFrag>,
}

impl MTheory {
    /// Random variable → the fragment whose local distribution defines it.
    /// Variables claimed by several fragments map to all of them.
    pub fn homes(&self) -> BTreeMap<NodeId, Vec<String>> {
        let mut homes: BTreeMap<NodeId, Vec<String>> = BTreeMap::new();
        for fragment in &self.fragments {
            for rv in &fragment.agents {
                homes.entry(rv.clone()).or_default().push(fragment.name.clone());
            }
        }
        for names in homes.values_mut() {
            names.sort();
        }
        homes
    }

    pub fn validate(&self) -> Vec<StructuralError> {
        let mut errors: Vec<StructuralError> = self
            .fragments
            .iter()
            .flat_map(|f| {
                f.validate().into_iter().map(|e| StructuralError::InFragment {
                    fragment: f.name.clone(),
                    error: Box::new(e),
                })
            })
            .collect();
        for (rv, fragments) in self.homes() {
            if fragments.len() > 1 {
                errors.push(StructuralError::DuplicateHome { rv, fragments });
            }
        }
        errors.sort();
        errors
    }
}
