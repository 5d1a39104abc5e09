//! Reward machines, hierarchies of them, and their call-stack semantics.
//!
//! # Model
//!
//! A [`RewardMachine`] has named states, one initial state, accepting and
//! rejecting state sets, and edges `(from, to, callee, context)`. The callee
//! is either another machine of the hierarchy or the leaf machine, which
//! accepts immediately. An [`Hrm`] is a set of machines over one shared
//! [`PropositionSet`] together with a designated root.
//!
//! # Semantics
//!
//! A [`HierarchyState`] records the current machine and state, the context
//! accumulated through nested calls, and a stack of pending calls. Taking an
//! edge pushes a call and descends into the callee until the leaf is
//! reached; reaching an accepting state with a non-empty stack pops back to
//! the caller. Reward is the goal indicator of the root machine.
//!
//! The exit condition of a machine state is the formula a label must satisfy
//! to leave it. Because every level conjoins the incoming context, the exit
//! condition under context `Φ` equals `Φ` conjoined with the exit condition
//! under `true`; [`Hrm::step`] uses that identity to avoid building formulas.

mod dot;
mod io;

pub use dot::to_dot;
pub use io::{
    load_hrm, load_traces, save_hrm, save_traces, EdgeSpec, HrmSpec, MachineSpec, TraceRecord,
};

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{Conjunction, Dnf, Label, PropositionSet};

/// Reference to a machine of a hierarchy or to the leaf machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MachineId {
    /// The leaf machine, which accepts as soon as it is called.
    Leaf,
    /// Index into [`Hrm::machines`].
    Index(usize),
}

/// Transition of a machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub callee: MachineId,
    pub context: Dnf,
}

/// A single reward machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewardMachine {
    name: String,
    states: Vec<String>,
    initial: usize,
    accepting: BTreeSet<usize>,
    rejecting: BTreeSet<usize>,
    edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
}

impl RewardMachine {
    /// Machine with the given states; the first one is initial.
    pub fn new<I, S>(name: impl Into<String>, states: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        if states.is_empty() {
            return Err(Error::InvalidMachine(format!("machine '{name}' has no states")));
        }
        if name == "leaf" {
            return Err(Error::InvalidMachine("'leaf' is reserved for the leaf machine".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &states {
            if !seen.insert(s) {
                return Err(Error::InvalidMachine(format!("duplicate state '{name}:{s}'")));
            }
        }
        let n = states.len();
        Ok(Self {
            name,
            states,
            initial: 0,
            accepting: BTreeSet::new(),
            rejecting: BTreeSet::new(),
            edges: Vec::new(),
            out: vec![Vec::new(); n],
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn state_name(&self, u: usize) -> &str {
        &self.states[u]
    }

    /// Index of a state by name.
    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::InvalidMachine(format!("unknown state '{}:{name}'", self.name)))
    }

    /// Appends a state and returns its index.
    pub fn add_state(&mut self, name: impl Into<String>) -> Result<usize> {
        let name = name.into();
        if self.states.contains(&name) {
            return Err(Error::InvalidMachine(format!("duplicate state '{}:{name}'", self.name)));
        }
        self.states.push(name);
        self.out.push(Vec::new());
        Ok(self.states.len() - 1)
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn set_initial(&mut self, u: usize) -> Result<()> {
        self.check_state(u)?;
        self.initial = u;
        Ok(())
    }

    pub fn accepting(&self) -> &BTreeSet<usize> {
        &self.accepting
    }

    pub fn rejecting(&self) -> &BTreeSet<usize> {
        &self.rejecting
    }

    pub fn set_accepting(&mut self, u: usize) -> Result<()> {
        self.check_state(u)?;
        if self.rejecting.contains(&u) {
            return Err(self.both_terminal(u));
        }
        self.accepting.insert(u);
        Ok(())
    }

    pub fn set_rejecting(&mut self, u: usize) -> Result<()> {
        self.check_state(u)?;
        if self.accepting.contains(&u) {
            return Err(self.both_terminal(u));
        }
        self.rejecting.insert(u);
        Ok(())
    }

    fn both_terminal(&self, u: usize) -> Error {
        Error::InvalidMachine(format!(
            "state '{}:{}' cannot be both accepting and rejecting",
            self.name, self.states[u]
        ))
    }

    pub fn is_accepting(&self, u: usize) -> bool {
        self.accepting.contains(&u)
    }

    pub fn is_rejecting(&self, u: usize) -> bool {
        self.rejecting.contains(&u)
    }

    pub fn is_terminal(&self, u: usize) -> bool {
        self.is_accepting(u) || self.is_rejecting(u)
    }

    fn check_state(&self, u: usize) -> Result<()> {
        if u < self.states.len() {
            Ok(())
        } else {
            Err(Error::InvalidMachine(format!("state index {u} out of range in '{}'", self.name)))
        }
    }

    /// Adds an edge; contexts must not be `false` and `(from, to, callee)` must be new.
    pub fn add_edge(&mut self, from: usize, to: usize, callee: MachineId, context: Dnf) -> Result<()> {
        self.check_state(from)?;
        self.check_state(to)?;
        if context.is_false() {
            return Err(Error::InvalidMachine(format!(
                "edge '{}:{}' -> '{}' has a false context",
                self.name, self.states[from], self.states[to]
            )));
        }
        if self.out[from].iter().any(|&e| self.edges[e].to == to && self.edges[e].callee == callee) {
            return Err(Error::InvalidMachine(format!(
                "duplicate edge '{}:{}' -> '{}' with the same callee",
                self.name, self.states[from], self.states[to]
            )));
        }
        self.out[from].push(self.edges.len());
        self.edges.push(Edge { from, to, callee, context });
        Ok(())
    }

    /// Replaces the context of an existing `(from, to, callee)` edge.
    pub fn set_edge_context(&mut self, from: usize, to: usize, callee: MachineId, context: Dnf) -> Result<()> {
        let idx = self.out[from]
            .iter()
            .copied()
            .find(|&e| self.edges[e].to == to && self.edges[e].callee == callee)
            .ok_or_else(|| Error::InvalidMachine(format!("no such edge in '{}'", self.name)))?;
        if context.is_false() {
            return Err(Error::InvalidMachine("false context".into()));
        }
        self.edges[idx].context = context;
        Ok(())
    }

    /// Edge with the given key, if any.
    pub fn find_edge(&self, from: usize, to: usize, callee: MachineId) -> Option<&Edge> {
        self.out_edges(from).find(|e| e.to == to && e.callee == callee)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges leaving `u`, in insertion order.
    pub fn out_edges(&self, u: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.out[u].iter().map(move |&e| &self.edges[e])
    }

    /// Machines called by this one (excluding the leaf).
    pub fn callees(&self) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter_map(|e| match e.callee {
                MachineId::Index(j) => Some(j),
                MachineId::Leaf => None,
            })
            .collect()
    }

    /// Copy keeping only the states for which `keep` is true.
    pub fn retain_states(&self, keep: &[bool]) -> Result<RewardMachine> {
        if !keep[self.initial] {
            return Err(Error::InvalidMachine("cannot remove the initial state".into()));
        }
        let mut map = vec![usize::MAX; self.states.len()];
        let mut names = Vec::new();
        for (u, s) in self.states.iter().enumerate() {
            if keep[u] {
                map[u] = names.len();
                names.push(s.clone());
            }
        }
        let mut m = RewardMachine::new(self.name.clone(), names)?;
        m.initial = map[self.initial];
        m.accepting = self.accepting.iter().filter(|&&u| keep[u]).map(|&u| map[u]).collect();
        m.rejecting = self.rejecting.iter().filter(|&&u| keep[u]).map(|&u| map[u]).collect();
        for e in &self.edges {
            if keep[e.from] && keep[e.to] {
                m.add_edge(map[e.from], map[e.to], e.callee, e.context.clone())?;
            }
        }
        Ok(m)
    }
}

/// Goal reward between two states of a machine.
pub fn reward_transition(m: &RewardMachine, u: usize, u2: usize) -> f64 {
    if !m.is_accepting(u) && m.is_accepting(u2) {
        1.0
    } else {
        0.0
    }
}

/// Input to the transition function: a label, or the sentinel that satisfies nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    Label(Label),
    Bottom,
}

/// Pending call on the hierarchy stack.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StackItem {
    /// State of the caller the call was made from.
    pub from: usize,
    /// State of the caller to resume at.
    pub resume: usize,
    pub caller: usize,
    pub callee: MachineId,
    /// Satisfied disjuncts of the edge context.
    pub phi: Dnf,
    /// Context accumulated before the call.
    pub context: Dnf,
}

/// Position of the agent inside a hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HierarchyState {
    pub machine: MachineId,
    pub state: usize,
    pub context: Dnf,
    pub stack: Vec<StackItem>,
}

/// Completed call reported by [`Hrm::step_traced`], in the order calls return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Advance {
    pub machine: usize,
    pub from: usize,
    pub to: usize,
    pub callee: MachineId,
    pub phi: Dnf,
    pub context: Dnf,
}

/// Outcome of running a trace through a hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
    None,
}

/// Kind of a label trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Goal,
    Deadend,
    Incomplete,
}

impl TraceKind {
    /// Verdict a hierarchy must produce for a trace of this kind.
    pub fn expected_verdict(self) -> Verdict {
        match self {
            TraceKind::Goal => Verdict::Accept,
            TraceKind::Deadend => Verdict::Reject,
            TraceKind::Incomplete => Verdict::None,
        }
    }
}

/// Label trace with its kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelTrace {
    pub labels: Vec<Label>,
    pub kind: TraceKind,
}

impl LabelTrace {
    pub fn new(labels: Vec<Label>, kind: TraceKind) -> Result<Self> {
        if labels.is_empty() && kind != TraceKind::Incomplete {
            return Err(Error::Config("goal and dead-end traces must be non-empty".into()));
        }
        Ok(Self { labels, kind })
    }
}

/// Result of [`Hrm::traverse`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Traversal {
    pub states: Vec<HierarchyState>,
    pub verdict: Verdict,
}

/// Determinism status of a validation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeterminismCheck {
    Checked,
    /// Too many propositions to enumerate labels.
    Unchecked,
}

/// A rule broken by a hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    CallCycle(Vec<String>),
    EdgeFromTerminal { machine: String, state: String },
    Nondeterminism { machine: String, state: String, edges: [(String, String); 2], witness: Label },
}

/// Outcome of [`Hrm::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub determinism: DeterminismCheck,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Largest proposition count for which determinism is checked by enumeration.
pub const MAX_ENUMERATED_PROPS: usize = 16;

/// Hierarchy of reward machines.
#[derive(Debug, Clone)]
pub struct Hrm {
    props: PropositionSet,
    machines: Vec<RewardMachine>,
    root: usize,
    acyclic: bool,
}

impl PartialEq for Hrm {
    fn eq(&self, other: &Self) -> bool {
        self.props == other.props && self.machines == other.machines && self.root == other.root
    }
}

impl Eq for Hrm {}

impl Hrm {
    /// Builds a hierarchy; callees must exist and machine names must be unique.
    ///
    /// Call cycles are accepted here and reported by [`Hrm::validate`];
    /// semantic operations refuse cyclic hierarchies.
    pub fn new(props: PropositionSet, machines: Vec<RewardMachine>, root: usize) -> Result<Self> {
        if root >= machines.len() {
            return Err(Error::InvalidMachine(format!("root index {root} out of range")));
        }
        let mut names = BTreeSet::new();
        for m in &machines {
            if !names.insert(m.name()) {
                return Err(Error::InvalidMachine(format!("duplicate machine '{}'", m.name())));
            }
            for e in m.edges() {
                if let MachineId::Index(j) = e.callee {
                    if j >= machines.len() {
                        return Err(Error::InvalidMachine(format!(
                            "machine '{}' calls undeclared machine index {j}",
                            m.name()
                        )));
                    }
                }
                let extra = e.context.mentioned() & !props.full_mask();
                if extra != 0 {
                    return Err(Error::InvalidMachine(format!(
                        "machine '{}' mentions propositions outside the set",
                        m.name()
                    )));
                }
            }
        }
        let mut h = Self { props, machines, root, acyclic: true };
        h.acyclic = h.find_cycle().is_none();
        Ok(h)
    }

    pub fn props(&self) -> &PropositionSet {
        &self.props
    }

    pub fn machines(&self) -> &[RewardMachine] {
        &self.machines
    }

    pub fn machine(&self, i: usize) -> &RewardMachine {
        &self.machines[i]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_machine(&self) -> &RewardMachine {
        &self.machines[self.root]
    }

    pub fn machine_index(&self, name: &str) -> Option<usize> {
        self.machines.iter().position(|m| m.name() == name)
    }

    /// Display name of a callee.
    pub fn callee_name(&self, m: MachineId) -> &str {
        match m {
            MachineId::Leaf => "leaf",
            MachineId::Index(i) => self.machines[i].name(),
        }
    }

    pub fn is_acyclic(&self) -> bool {
        self.acyclic
    }

    fn require_acyclic(&self) -> Result<()> {
        if self.acyclic {
            Ok(())
        } else {
            let cycle = self.find_cycle().unwrap_or_default();
            Err(Error::CallCycle(cycle.join(" -> ")))
        }
    }

    /// A call cycle as a list of machine names, if one exists.
    pub fn find_cycle(&self) -> Option<Vec<String>> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut color = vec![0u8; self.machines.len()];
        let mut path = Vec::new();
        for s in 0..self.machines.len() {
            if color[s] == 0 {
                if let Some(c) = self.cycle_dfs(s, &mut color, &mut path) {
                    return Some(c);
                }
            }
        }
        None
    }

    fn cycle_dfs(&self, i: usize, color: &mut [u8], path: &mut Vec<usize>) -> Option<Vec<String>> {
        color[i] = 1;
        path.push(i);
        for j in self.machines[i].callees() {
            if color[j] == 1 {
                let start = path.iter().position(|&p| p == j).unwrap_or(0);
                let mut names: Vec<String> =
                    path[start..].iter().map(|&k| self.machines[k].name().to_string()).collect();
                names.push(self.machines[j].name().to_string());
                return Some(names);
            }
            if color[j] == 0 {
                if let Some(c) = self.cycle_dfs(j, color, path) {
                    return Some(c);
                }
            }
        }
        path.pop();
        color[i] = 2;
        None
    }

    /// Maximum number of nested calls; the leaf has height 0.
    pub fn height_of(&self, m: MachineId) -> Result<usize> {
        self.require_acyclic()?;
        let mut memo = HashMap::new();
        Ok(self.height_memo(m, &mut memo))
    }

    fn height_memo(&self, m: MachineId, memo: &mut HashMap<usize, usize>) -> usize {
        match m {
            MachineId::Leaf => 0,
            MachineId::Index(i) => {
                if let Some(&h) = memo.get(&i) {
                    return h;
                }
                let h = 1 + self.machines[i]
                    .edges()
                    .iter()
                    .map(|e| self.height_memo(e.callee, memo))
                    .max()
                    .unwrap_or(0);
                memo.insert(i, h);
                h
            }
        }
    }

    /// Height of the root.
    pub fn height(&self) -> Result<usize> {
        self.height_of(MachineId::Index(self.root))
    }

    /// Machines reachable from the root, including it, in index order.
    pub fn reachable(&self) -> Vec<usize> {
        let mut seen = vec![false; self.machines.len()];
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                continue;
            }
            stack.extend(self.machines[i].callees());
        }
        (0..self.machines.len()).filter(|&i| seen[i]).collect()
    }

    /// Formula a label must satisfy to leave `u` of `m` under context `phi`.
    pub fn exit_condition(&self, m: MachineId, u: usize, phi: &Dnf) -> Result<Dnf> {
        self.require_acyclic()?;
        Ok(self.exit_condition_rec(m, u, phi))
    }

    fn exit_condition_rec(&self, m: MachineId, u: usize, phi: &Dnf) -> Dnf {
        match m {
            MachineId::Leaf => phi.clone(),
            MachineId::Index(i) => {
                let mut out = Dnf::ff();
                for e in self.machines[i].out_edges(u) {
                    let ctx = phi.and(&e.context);
                    if ctx.is_false() {
                        continue;
                    }
                    let init = self.initial_of(e.callee);
                    out = out.or(&self.exit_condition_rec(e.callee, init, &ctx));
                }
                out
            }
        }
    }

    fn initial_of(&self, m: MachineId) -> usize {
        match m {
            MachineId::Leaf => 0,
            MachineId::Index(i) => self.machines[i].initial(),
        }
    }

    /// Whether `label` satisfies the exit condition of `m`'s initial state under `true`.
    pub fn exit_sat(&self, label: Label, m: MachineId) -> bool {
        match m {
            MachineId::Leaf => true,
            MachineId::Index(i) => {
                let mm = &self.machines[i];
                mm.out_edges(mm.initial())
                    .any(|e| e.context.satisfied_by(label) && self.exit_sat(label, e.callee))
            }
        }
    }

    /// Edges of `(m, u)` that `label` can take under `context`.
    pub fn applicable_edges<'a>(
        &'a self,
        m: usize,
        u: usize,
        context: &Dnf,
        label: Label,
    ) -> impl Iterator<Item = &'a Edge> + 'a {
        let ctx_ok = context.satisfied_by(label);
        self.machines[m]
            .out_edges(u)
            .filter(move |e| ctx_ok && e.context.satisfied_by(label) && self.exit_sat(label, e.callee))
    }

    /// Hierarchy state at the start of a traversal.
    pub fn initial_state(&self) -> HierarchyState {
        HierarchyState {
            machine: MachineId::Index(self.root),
            state: self.root_machine().initial(),
            context: Dnf::True,
            stack: Vec::new(),
        }
    }

    /// Hierarchical transition function.
    pub fn step(&self, hs: &HierarchyState, symbol: Symbol) -> Result<HierarchyState> {
        self.step_traced(hs, symbol, &mut Vec::new())
    }

    /// Like [`Hrm::step`], also reporting every call that returns.
    pub fn step_traced(
        &self,
        hs: &HierarchyState,
        mut symbol: Symbol,
        events: &mut Vec<Advance>,
    ) -> Result<HierarchyState> {
        self.require_acyclic()?;
        let mut hs = hs.clone();
        loop {
            let m = match hs.machine {
                MachineId::Leaf => {
                    self.pop(&mut hs, events);
                    symbol = Symbol::Bottom;
                    continue;
                }
                MachineId::Index(m) => m,
            };
            if self.machines[m].is_accepting(hs.state) && !hs.stack.is_empty() {
                self.pop(&mut hs, events);
                symbol = Symbol::Bottom;
                continue;
            }
            let Symbol::Label(label) = symbol else {
                return Ok(hs);
            };
            let (edge, more) = {
                let mut found = self.applicable_edges(m, hs.state, &hs.context, label);
                (found.next(), found.next().is_some())
            };
            let Some(edge) = edge else {
                return Ok(hs);
            };
            if more {
                return Err(Error::Nondeterministic {
                    machine: self.machines[m].name().to_string(),
                    state: self.machines[m].state_name(hs.state).to_string(),
                    label: self.props.format_label(label),
                });
            }
            let phi = edge.context.satisfied_disjuncts(label);
            let context = hs.context.and(&phi);
            hs.stack.push(StackItem {
                from: hs.state,
                resume: edge.to,
                caller: m,
                callee: edge.callee,
                phi,
                context: std::mem::replace(&mut hs.context, context),
            });
            hs.machine = edge.callee;
            hs.state = self.initial_of(edge.callee);
        }
    }

    fn pop(&self, hs: &mut HierarchyState, events: &mut Vec<Advance>) {
        let item = hs.stack.pop().expect("pop requires a pending call");
        events.push(Advance {
            machine: item.caller,
            from: item.from,
            to: item.resume,
            callee: item.callee,
            phi: item.phi,
            context: item.context,
        });
        hs.machine = MachineId::Index(item.caller);
        hs.state = item.resume;
        hs.context = Dnf::True;
    }

    /// Verdict of a hierarchy state reached after a full step.
    pub fn verdict(&self, hs: &HierarchyState) -> Verdict {
        match hs.machine {
            MachineId::Index(m) if self.machines[m].is_rejecting(hs.state) => Verdict::Reject,
            MachineId::Index(m)
                if m == self.root && hs.stack.is_empty() && self.machines[m].is_accepting(hs.state) =>
            {
                Verdict::Accept
            }
            _ => Verdict::None,
        }
    }

    /// Runs a trace from the initial hierarchy state.
    pub fn traverse(&self, labels: &[Label]) -> Result<Traversal> {
        let mut states = Vec::with_capacity(labels.len() + 1);
        let mut hs = self.initial_state();
        states.push(hs.clone());
        for &l in labels {
            hs = self.step(&hs, Symbol::Label(l))?;
            states.push(hs.clone());
        }
        let verdict = self.verdict(&hs);
        Ok(Traversal { states, verdict })
    }

    /// Verdict of a trace without keeping intermediate states.
    pub fn classify(&self, labels: &[Label]) -> Result<Verdict> {
        let mut hs = self.initial_state();
        for &l in labels {
            hs = self.step(&hs, Symbol::Label(l))?;
        }
        Ok(self.verdict(&hs))
    }

    /// Checks the structural and determinism rules.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if let Some(c) = self.find_cycle() {
            violations.push(Violation::CallCycle(c));
        }
        for m in &self.machines {
            for u in 0..m.num_states() {
                if m.is_terminal(u) && m.out_edges(u).next().is_some() {
                    violations.push(Violation::EdgeFromTerminal {
                        machine: m.name().to_string(),
                        state: m.state_name(u).to_string(),
                    });
                }
            }
        }
        if !self.acyclic || self.props.len() > MAX_ENUMERATED_PROPS {
            return ValidationReport { violations, determinism: DeterminismCheck::Unchecked };
        }
        let n_labels = 1u64 << self.props.len();
        for m in &self.machines {
            for u in 0..m.num_states() {
                let edges: Vec<&Edge> = m.out_edges(u).collect();
                let mut reported = BTreeSet::new();
                for l in 0..n_labels {
                    let label = Label(l);
                    let hits: Vec<usize> = (0..edges.len())
                        .filter(|&k| {
                            edges[k].context.satisfied_by(label) && self.exit_sat(label, edges[k].callee)
                        })
                        .collect();
                    for a in 0..hits.len() {
                        for b in a + 1..hits.len() {
                            if reported.insert((hits[a], hits[b])) {
                                let desc = |e: &Edge| {
                                    (m.state_name(e.to).to_string(), self.callee_name(e.callee).to_string())
                                };
                                violations.push(Violation::Nondeterminism {
                                    machine: m.name().to_string(),
                                    state: m.state_name(u).to_string(),
                                    edges: [desc(edges[hits[a]]), desc(edges[hits[b]])],
                                    witness: label,
                                });
                            }
                        }
                    }
                }
            }
        }
        ValidationReport { violations, determinism: DeterminismCheck::Checked }
    }

    /// Total states over the machines reachable from the root.
    pub fn num_states(&self) -> usize {
        self.reachable().iter().map(|&i| self.machines[i].num_states()).sum()
    }

    /// Total edges over the machines reachable from the root.
    pub fn num_edges(&self) -> usize {
        self.reachable().iter().map(|&i| self.machines[i].num_edges()).sum()
    }

    /// Renders a hierarchy state as `<M, u, Φ, [items]>`.
    pub fn format_state(&self, hs: &HierarchyState) -> String {
        let fmt_state = |m: MachineId, u: usize| match m {
            MachineId::Leaf => "u0".to_string(),
            MachineId::Index(i) => self.machines[i].state_name(u).to_string(),
        };
        let items: Vec<String> = hs
            .stack
            .iter()
            .map(|it| {
                format!(
                    "<{}, {}, {}, {}, {}, {}>",
                    self.machines[it.caller].state_name(it.from),
                    self.machines[it.caller].state_name(it.resume),
                    self.machines[it.caller].name(),
                    self.callee_name(it.callee),
                    it.phi.display(&self.props),
                    it.context.display(&self.props)
                )
            })
            .collect();
        format!(
            "<{}, {}, {}, [{}]>",
            self.callee_name(hs.machine),
            fmt_state(hs.machine, hs.state),
            hs.context.display(&self.props),
            items.join(", ")
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CallCycle(c) => write!(f, "call cycle: {}", c.join(" -> ")),
            Violation::EdgeFromTerminal { machine, state } => {
                write!(f, "edge leaves terminal state {machine}:{state}")
            }
            Violation::Nondeterminism { machine, state, edges, witness } => write!(
                f,
                "nondeterminism at {machine}:{state} between ->{} ({}) and ->{} ({}), witness mask {:#x}",
                edges[0].0, edges[0].1, edges[1].0, edges[1].1, witness.0
            ),
        }
    }
}

/// Most specific conjunction satisfied by exactly one label.
pub fn exact_conjunction(props: &PropositionSet, label: Label) -> Conjunction {
    Conjunction::exact(label, props.full_mask())
}
