//! Learning the root machine of a hierarchy from labeled traces.
//!
//! # Task
//!
//! Given callable machines, a number of root states and example traces
//! labeled goal, dead-end or incomplete, find root transitions such that the
//! resulting hierarchy accepts every goal trace, rejects every dead-end trace
//! and leaves every incomplete trace undecided. Roots have a single
//! accepting state `uA` and, when dead-end examples exist, a single rejecting
//! state `uR`.
//!
//! # Structural constraints
//!
//! - (a) the root is deterministic, including the exit conditions of callees;
//! - (b) every edge calls one machine;
//! - (c) no literal appears with both signs;
//! - (d) leaf-call formulas contain a positive literal;
//! - (e) every non-terminal state has an outgoing edge;
//! - (f) the root's state graph is acyclic.
//!
//! Each edge carries at most `κ` disjuncts.
//!
//! # Search
//!
//! The search replays the examples against a partial root. Whenever a trace
//! rests at state `u` on a label `ℓ` whose outcome is still open, it branches
//! on which edge fires there: an existing edge, a new edge, or none. Edge
//! formulas are kept as the sets of labels they must and must not satisfy,
//! witnessed by the most specific conjunction of the former; a final pass
//! drops literals that are not needed. Intermediate states are introduced in
//! order of first use, which prunes isomorphic roots.

mod search;

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::logic::PropositionSet;
use crate::machines::MachineSpec;
use crate::machines::{Hrm, LabelTrace, TraceKind};
use crate::{Error, Result};

/// Structural constraints enforced by the search; all on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Constraints {
    /// (b) one callee per edge.
    pub one_callee: bool,
    /// (d) leaf-call formulas have a positive literal.
    pub leaf_positive: bool,
    /// (e) non-terminal states have outgoing edges.
    pub outgoing: bool,
    /// (f) acyclic root.
    pub acyclic: bool,
}

impl Default for Constraints {
    fn default() -> Self {
        Self { one_callee: true, leaf_positive: true, outgoing: true, acyclic: true }
    }
}

/// A root-learning problem.
#[derive(Debug, Clone)]
pub struct InductionTask {
    /// Name of the root machine to learn.
    pub root_name: String,
    pub props: PropositionSet,
    /// Hierarchies whose roots may be called; the leaf is always callable.
    pub callable: Vec<Hrm>,
    /// Root states, counting `u0`, `uA` and `uR` when present.
    pub num_states: usize,
    /// Maximum disjuncts per edge.
    pub kappa: usize,
    pub examples: Vec<LabelTrace>,
    pub constraints: Constraints,
}

impl InductionTask {
    pub fn new(root_name: impl Into<String>, props: PropositionSet, examples: Vec<LabelTrace>) -> Self {
        Self {
            root_name: root_name.into(),
            props,
            callable: Vec::new(),
            num_states: 3,
            kappa: 1,
            examples,
            constraints: Constraints::default(),
        }
    }

    pub fn with_callable(mut self, callable: Vec<Hrm>) -> Self {
        self.callable = callable;
        self
    }

    pub fn with_states(mut self, n: usize) -> Self {
        self.num_states = n;
        self
    }

    pub fn has_deadends(&self) -> bool {
        self.examples.iter().any(|t| t.kind == TraceKind::Deadend)
    }

    /// Fewest root states that can hold `u0`, `uA` and, if needed, `uR`.
    pub fn min_states(&self) -> usize {
        if self.has_deadends() {
            3
        } else {
            2
        }
    }
}

/// Search limits; the node limit keeps outcomes reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub max_nodes: u64,
    pub time_limit: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Self { max_nodes: 5_000_000, time_limit: None }
    }
}

/// Result kind of an induction call.
#[derive(Debug, Clone)]
pub enum Outcome {
    Solution(Hrm),
    Unsat,
    Timeout,
}

impl Outcome {
    pub fn solution(&self) -> Option<&Hrm> {
        match self {
            Outcome::Solution(h) => Some(h),
            _ => None,
        }
    }

    pub fn is_sat(&self) -> bool {
        matches!(self, Outcome::Solution(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Solution(_) => "solution",
            Outcome::Unsat => "unsat",
            Outcome::Timeout => "timeout",
        }
    }
}

/// Search statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InductionStats {
    pub nodes: u64,
    pub elapsed_ms: u128,
    /// Root states of the last attempt.
    pub num_states: usize,
    /// Outcome of each attempted state count, for iterative deepening.
    pub attempts: BTreeMap<usize, String>,
}

#[derive(Debug, Clone)]
pub struct InductionResult {
    pub outcome: Outcome,
    pub stats: InductionStats,
}

/// Whether the hierarchy classifies the trace as its kind demands.
pub fn check_validity(hrm: &Hrm, trace: &LabelTrace) -> bool {
    hrm.classify(&trace.labels).map(|v| v == trace.kind.expected_verdict()).unwrap_or(false)
}

/// Fails if a label sequence appears under two kinds.
pub fn check_consistency(examples: &[LabelTrace]) -> Result<()> {
    let mut seen: HashMap<&[crate::logic::Label], TraceKind> = HashMap::new();
    for t in examples {
        if let Some(k) = seen.insert(&t.labels, t.kind) {
            if k != t.kind {
                return Err(Error::Induction(format!(
                    "the same trace is labeled both {k:?} and {:?}",
                    t.kind
                )));
            }
        }
    }
    Ok(())
}

/// Machine definitions of the callable hierarchies merged by name, and the
/// names of the callable roots.
pub(crate) fn library(task: &InductionTask) -> Result<(Vec<MachineSpec>, Vec<String>)> {
    let mut machines: Vec<MachineSpec> = Vec::new();
    let mut roots = Vec::new();
    for h in &task.callable {
        let spec = h.to_spec();
        if h.props() != &task.props {
            return Err(Error::Induction(format!(
                "callable '{}' uses propositions {:?}",
                spec.root, spec.propositions
            )));
        }
        if !h.validate().is_valid() {
            return Err(Error::Induction(format!("callable '{}' does not validate", spec.root)));
        }
        for ms in spec.machines {
            match machines.iter().find(|m| m.id == ms.id) {
                Some(prev) if *prev != ms => {
                    return Err(Error::Induction(format!("conflicting definitions of machine '{}'", ms.id)));
                }
                Some(_) => {}
                None => machines.push(ms),
            }
        }
        if !roots.contains(&spec.root) {
            roots.push(spec.root);
        }
    }
    if machines.iter().any(|m| m.id == task.root_name) {
        return Err(Error::Induction(format!("root name '{}' clashes with a callable machine", task.root_name)));
    }
    Ok((machines, roots))
}

/// Learns a root with exactly `task.num_states` states.
pub fn induce_root(task: &InductionTask, budget: Budget) -> Result<InductionResult> {
    let start = Instant::now();
    let mut nodes = 0;
    let outcome = induce_sized(task, task.num_states, budget, start, &mut nodes)?;
    let mut stats = InductionStats {
        nodes,
        elapsed_ms: start.elapsed().as_millis(),
        num_states: task.num_states,
        attempts: BTreeMap::new(),
    };
    stats.attempts.insert(task.num_states, outcome.label().to_string());
    Ok(InductionResult { outcome, stats })
}

/// Learns a state-minimal root by trying `start..=task.num_states` states.
///
/// The budget is shared by all attempts.
pub fn minimal_induce(task: &InductionTask, start: usize, budget: Budget) -> Result<InductionResult> {
    let begin = Instant::now();
    let mut nodes = 0;
    let mut stats = InductionStats::default();
    let first = start.max(task.min_states());
    for n in first..=task.num_states.max(first) {
        let outcome = induce_sized(task, n, budget, begin, &mut nodes)?;
        stats.attempts.insert(n, outcome.label().to_string());
        stats.num_states = n;
        stats.nodes = nodes;
        stats.elapsed_ms = begin.elapsed().as_millis();
        match outcome {
            Outcome::Unsat => continue,
            other => return Ok(InductionResult { outcome: other, stats }),
        }
    }
    Ok(InductionResult { outcome: Outcome::Unsat, stats })
}

fn induce_sized(task: &InductionTask, n: usize, budget: Budget, start: Instant, nodes: &mut u64) -> Result<Outcome> {
    check_consistency(&task.examples)?;
    if task.kappa == 0 {
        return Err(Error::Config("κ must be at least 1".into()));
    }
    if n < task.min_states() {
        return Ok(Outcome::Unsat);
    }
    let mut s = search::Search::new(task, n, budget, start, *nodes)?;
    let out = s.run();
    *nodes = s.nodes();
    let out = out?;
    if let Outcome::Solution(h) = &out {
        debug_assert!(h.validate().is_valid());
        if !h.validate().is_valid() || !task.examples.iter().all(|t| check_validity(h, t)) {
            return Err(Error::Induction("internal error: solution fails verification".into()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
