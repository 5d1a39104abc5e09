//! Backtracking search over root transitions.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use super::{library, Budget, InductionTask, Outcome};
use crate::logic::{Conjunction, Dnf, Label};
use crate::machines::{EdgeSpec, Hrm, HrmSpec, MachineId, MachineSpec, TraceKind, Verdict};
use crate::{Error, Result};

/// Largest proposition count for which the fill pass enumerates labels.
const MAX_FILL_PROPS: usize = 16;

/// Outcome of running a callee from some trace position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Run {
    /// Accepted after consuming the label at this position.
    Accept(usize),
    Reject,
    /// The trace ends inside the call.
    Open,
    /// The callee is nondeterministic on the trace.
    Broken,
}

struct Callee {
    name: String,
    hrm: Option<Hrm>,
    xi: Dnf,
}

/// An edge disjunct: the labels it must satisfy are summarized by their
/// intersection `pos` and union `uni`, the ones it must not by `unsat`.
#[derive(Debug, Clone)]
struct SEdge {
    from: usize,
    to: usize,
    callee: usize,
    pos: u64,
    uni: u64,
    unsat: Vec<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Fires,
    No,
    Unknown,
}

#[derive(Debug, Clone, Copy)]
struct Cursor {
    state: usize,
    pos: usize,
    verdict: Option<Verdict>,
}

#[derive(Debug, Clone)]
struct Node {
    edges: Vec<SEdge>,
    nofire: Vec<Vec<Label>>,
    cursors: Vec<Cursor>,
}

enum Flow {
    Found(Hrm),
    Exhausted,
    Timeout,
}

pub(super) struct Search<'a> {
    task: &'a InductionTask,
    full: u64,
    num_states: usize,
    intermediates: usize,
    accept: usize,
    reject: Option<usize>,
    library: Vec<MachineSpec>,
    /// Index 0 is the leaf.
    callees: Vec<Callee>,
    order: Vec<usize>,
    runs: HashMap<(usize, usize, usize), Run>,
    budget: Budget,
    start: Instant,
    nodes: u64,
}

impl<'a> Search<'a> {
    pub(super) fn new(task: &'a InductionTask, n: usize, budget: Budget, start: Instant, nodes: u64) -> Result<Self> {
        let (library, roots) = library(task)?;
        let mut callees = vec![Callee { name: "leaf".into(), hrm: None, xi: Dnf::tt() }];
        for name in roots {
            let spec = HrmSpec {
                propositions: task.props.names().to_vec(),
                root: name.clone(),
                machines: library.clone(),
            };
            let hrm = Hrm::from_spec(&spec)?;
            let m = MachineId::Index(hrm.root());
            let xi = hrm.exit_condition(m, hrm.root_machine().initial(), &Dnf::tt())?;
            callees.push(Callee { name, hrm: Some(hrm), xi });
        }
        let reject = task.has_deadends().then_some(n - 1);
        let accept = if reject.is_some() { n - 2 } else { n - 1 };
        let mut order: Vec<usize> = (0..task.examples.len()).collect();
        order.sort_by_key(|&t| task.examples[t].labels.len());
        Ok(Self {
            task,
            full: task.props.full_mask(),
            num_states: n,
            intermediates: accept - 1,
            accept,
            reject,
            library,
            callees,
            order,
            runs: HashMap::new(),
            budget,
            start,
            nodes,
        })
    }

    pub(super) fn nodes(&self) -> u64 {
        self.nodes
    }

    pub(super) fn run(&mut self) -> Result<Outcome> {
        let root = Node {
            edges: Vec::new(),
            nofire: vec![Vec::new(); self.num_states],
            cursors: vec![Cursor { state: 0, pos: 0, verdict: None }; self.task.examples.len()],
        };
        match self.dfs(root)? {
            Flow::Found(h) => Ok(Outcome::Solution(h)),
            Flow::Exhausted => Ok(Outcome::Unsat),
            Flow::Timeout => Ok(Outcome::Timeout),
        }
    }

    fn out_of_budget(&self) -> bool {
        if self.nodes > self.budget.max_nodes {
            return true;
        }
        match self.budget.time_limit {
            Some(limit) if self.nodes.is_multiple_of(256) => self.start.elapsed() > limit,
            _ => false,
        }
    }

    fn is_terminal(&self, u: usize) -> bool {
        u == self.accept || Some(u) == self.reject
    }

    fn xi_sat(&self, c: usize, label: Label) -> bool {
        match &self.callees[c].hrm {
            None => true,
            Some(h) => h.exit_sat(label, MachineId::Index(h.root())),
        }
    }

    fn witness(&self, e: &SEdge) -> Conjunction {
        Conjunction::new(e.pos, self.full & !e.uni)
    }

    fn status(&self, e: &SEdge, label: Label) -> Status {
        if !self.xi_sat(e.callee, label) {
            return Status::No;
        }
        if self.witness(e).satisfied_by(label) {
            return Status::Fires;
        }
        if e.unsat.contains(&label) {
            return Status::No;
        }
        if e.callee == 0 && self.task.constraints.leaf_positive && label.0 & e.pos == 0 {
            return Status::No;
        }
        Status::Unknown
    }

    fn callee_run(&mut self, c: usize, t: usize, i: usize) -> Run {
        if let Some(&r) = self.runs.get(&(c, t, i)) {
            return r;
        }
        let h = self.callees[c].hrm.as_ref().expect("callee runs are for machines");
        let labels = &self.task.examples[t].labels;
        let mut hs = h.initial_state();
        let mut out = Run::Open;
        for (k, &l) in labels.iter().enumerate().skip(i) {
            hs = match h.step(&hs, crate::machines::Symbol::Label(l)) {
                Ok(next) => next,
                Err(_) => {
                    out = Run::Broken;
                    break;
                }
            };
            match h.verdict(&hs) {
                Verdict::Accept => {
                    out = Run::Accept(k);
                    break;
                }
                Verdict::Reject => {
                    out = Run::Reject;
                    break;
                }
                Verdict::None => {}
            }
        }
        self.runs.insert((c, t, i), out);
        out
    }

    /// Moves a trace's cursor while its next step is decided. Returns the
    /// open `(state, label)` it stops at, or `Err` if it is misclassified.
    fn advance(&mut self, node: &mut Node, t: usize) -> std::result::Result<Option<(usize, Label)>, ()> {
        let trace = &self.task.examples[t];
        let expected = trace.kind.expected_verdict();
        let len = trace.labels.len();
        let mut cur = node.cursors[t];
        let result = loop {
            if let Some(v) = cur.verdict {
                break if v == expected { Ok(None) } else { Err(()) };
            }
            if cur.state == self.accept {
                cur.verdict = Some(Verdict::Accept);
                continue;
            }
            if Some(cur.state) == self.reject {
                cur.verdict = Some(Verdict::Reject);
                continue;
            }
            if cur.pos == len {
                cur.verdict = Some(Verdict::None);
                continue;
            }
            let label = self.task.examples[t].labels[cur.pos];
            let fired = node
                .edges
                .iter()
                .find(|e| e.from == cur.state && self.status(e, label) == Status::Fires)
                .map(|e| (e.to, e.callee));
            match fired {
                Some((to, 0)) => {
                    cur.state = to;
                    cur.pos += 1;
                }
                Some((to, c)) => match self.callee_run(c, t, cur.pos) {
                    Run::Accept(k) => {
                        cur.state = to;
                        cur.pos = k + 1;
                    }
                    Run::Reject => cur.verdict = Some(Verdict::Reject),
                    Run::Open => cur.verdict = Some(Verdict::None),
                    Run::Broken => break Err(()),
                },
                None if node.nofire[cur.state].contains(&label) => cur.pos += 1,
                None => break Ok(Some((cur.state, label))),
            }
        };
        node.cursors[t] = cur;
        result
    }

    fn dfs(&mut self, mut node: Node) -> Result<Flow> {
        self.nodes += 1;
        if self.out_of_budget() {
            return Ok(Flow::Timeout);
        }
        let mut choice = None;
        for k in 0..self.order.len() {
            let t = self.order[k];
            match self.advance(&mut node, t) {
                Err(()) => return Ok(Flow::Exhausted),
                Ok(Some(c)) if choice.is_none() => choice = Some((t, c)),
                Ok(_) => {}
            }
        }
        let Some((t, (u, label))) = choice else {
            return Ok(match self.finish(&node)? {
                Some(h) => Flow::Found(h),
                None => Flow::Exhausted,
            });
        };
        let children = if self.task.examples[t].kind == TraceKind::Incomplete {
            let mut c = self.branch_none(&node, u, label);
            c.extend(self.branch_fire(&node, u, label));
            c.extend(self.branch_new(&node, u, label));
            c
        } else {
            let mut c = self.branch_fire(&node, u, label);
            c.extend(self.branch_new(&node, u, label));
            c.extend(self.branch_none(&node, u, label));
            c
        };
        for child in children {
            match self.dfs(child)? {
                Flow::Exhausted => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Exhausted)
    }

    fn same_edge(a: &SEdge, b: &SEdge) -> bool {
        a.to == b.to && a.callee == b.callee
    }

    fn exclusive(&self, c1: &Conjunction, k1: usize, c2: &Conjunction, k2: usize) -> bool {
        match c1.and(c2) {
            None => true,
            Some(c) => Dnf::conj(c).and(&self.callees[k1].xi).and(&self.callees[k2].xi).is_false(),
        }
    }

    /// Edge `i` is consistent with its unsatisfied labels and exclusive with
    /// its siblings.
    fn edge_ok(&self, edges: &[SEdge], i: usize) -> bool {
        let e = &edges[i];
        if e.callee == 0 && self.task.constraints.leaf_positive && e.pos == 0 {
            return false;
        }
        let w = self.witness(e);
        if e.unsat.iter().any(|&l| w.satisfied_by(l)) {
            return false;
        }
        edges.iter().enumerate().all(|(j, o)| {
            j == i || o.from != e.from || Self::same_edge(e, o) || self.exclusive(&w, e.callee, &self.witness(o), o.callee)
        })
    }

    /// Other edges from `u` must not fire on `label` once `i` does.
    fn exclude_others(&self, node: &mut Node, i: usize, label: Label) {
        let (from, to, callee) = (node.edges[i].from, node.edges[i].to, node.edges[i].callee);
        for j in 0..node.edges.len() {
            let o = &node.edges[j];
            if j == i || o.from != from || (o.to == to && o.callee == callee) {
                continue;
            }
            if self.xi_sat(o.callee, label) && !o.unsat.contains(&label) {
                node.edges[j].unsat.push(label);
            }
        }
    }

    fn branch_fire(&self, node: &Node, u: usize, label: Label) -> Vec<Node> {
        let mut out = Vec::new();
        for i in 0..node.edges.len() {
            let e = &node.edges[i];
            if e.from != u || self.status(e, label) != Status::Unknown {
                continue;
            }
            let mut child = node.clone();
            child.edges[i].pos &= label.0;
            child.edges[i].uni |= label.0;
            self.exclude_others(&mut child, i, label);
            if self.edge_ok(&child.edges, i) {
                out.push(child);
            }
        }
        out
    }

    fn reaches(&self, edges: &[SEdge], from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.num_states];
        let mut stack = vec![from];
        while let Some(s) = stack.pop() {
            if s == to {
                return true;
            }
            if std::mem::replace(&mut seen[s], true) {
                continue;
            }
            stack.extend(edges.iter().filter(|e| e.from == s).map(|e| e.to));
        }
        false
    }

    fn targets(&self, node: &Node, u: usize) -> Vec<usize> {
        let mut used = vec![false; self.num_states];
        used[u] = true;
        for e in &node.edges {
            used[e.to] = true;
        }
        let mut out = Vec::new();
        if !self.task.constraints.acyclic {
            out.push(0);
        }
        for s in 1..=self.intermediates {
            out.push(s);
            if !used[s] {
                break;
            }
        }
        out.push(self.accept);
        out.extend(self.reject);
        out.retain(|&s| s != u);
        if self.task.constraints.acyclic {
            out.retain(|&s| !self.reaches(&node.edges, s, u));
        }
        out
    }

    fn slots_left(&self, edges: &[SEdge], u: usize, to: usize, callee: usize) -> bool {
        let used = edges
            .iter()
            .filter(|e| e.from == u && e.to == to && (self.task.constraints.one_callee || e.callee == callee))
            .count();
        used < self.task.kappa
    }

    fn branch_new(&self, node: &Node, u: usize, label: Label) -> Vec<Node> {
        let mut out = Vec::new();
        for to in self.targets(node, u) {
            for c in 0..self.callees.len() {
                if !self.xi_sat(c, label) || !self.slots_left(&node.edges, u, to, c) {
                    continue;
                }
                if c == 0 && self.task.constraints.leaf_positive && label.is_empty() {
                    continue;
                }
                let unsat = node.nofire[u].iter().copied().filter(|&l| self.xi_sat(c, l)).collect();
                let mut child = node.clone();
                child.edges.push(SEdge { from: u, to, callee: c, pos: label.0, uni: label.0, unsat });
                let i = child.edges.len() - 1;
                self.exclude_others(&mut child, i, label);
                if self.edge_ok(&child.edges, i) {
                    out.push(child);
                }
            }
        }
        out
    }

    fn branch_none(&self, node: &Node, u: usize, label: Label) -> Vec<Node> {
        let mut child = node.clone();
        child.nofire[u].push(label);
        for e in child.edges.iter_mut().filter(|e| e.from == u) {
            if self.xi_sat(e.callee, label) && !e.unsat.contains(&label) {
                e.unsat.push(label);
            }
        }
        vec![child]
    }

    /// Completes a covering assignment: adds edges to states that lack them,
    /// generalizes formulas and builds the hierarchy.
    fn finish(&self, node: &Node) -> Result<Option<Hrm>> {
        let mut edges = node.edges.clone();
        if self.task.constraints.outgoing {
            for s in 0..self.num_states {
                if self.is_terminal(s) || edges.iter().any(|e| e.from == s) {
                    continue;
                }
                match self.fill_edge(node, s) {
                    Some(e) => edges.push(e),
                    None => return Ok(None),
                }
            }
        }
        let mut formulas: Vec<Conjunction> = edges.iter().map(|e| self.witness(e)).collect();
        for i in 0..edges.len() {
            let lits = formulas[i].literals();
            let order = lits.iter().filter(|l| !l.1).chain(lits.iter().filter(|l| l.1));
            for &(p, positive) in order {
                let mut cand = formulas[i];
                if positive {
                    cand.pos &= !(1 << p);
                } else {
                    cand.neg &= !(1 << p);
                }
                if edges[i].callee == 0 && self.task.constraints.leaf_positive && cand.pos == 0 {
                    continue;
                }
                if edges[i].unsat.iter().any(|&l| cand.satisfied_by(l)) {
                    continue;
                }
                let exclusive = edges.iter().enumerate().all(|(j, o)| {
                    j == i
                        || o.from != edges[i].from
                        || Self::same_edge(&edges[i], o)
                        || self.exclusive(&cand, edges[i].callee, &formulas[j], o.callee)
                });
                if exclusive {
                    formulas[i] = cand;
                }
            }
        }
        self.build(&edges, &formulas).map(Some)
    }

    fn fill_edge(&self, node: &Node, s: usize) -> Option<SEdge> {
        let n = self.task.props.len().min(MAX_FILL_PROPS);
        for bits in 0..1u64 << n {
            let label = Label(bits);
            for c in 0..self.callees.len() {
                if c == 0 && self.task.constraints.leaf_positive && label.is_empty() {
                    continue;
                }
                if node.nofire[s].contains(&label) && self.xi_sat(c, label) {
                    continue;
                }
                let unsat = node.nofire[s].iter().copied().filter(|&l| self.xi_sat(c, l)).collect();
                return Some(SEdge { from: s, to: self.accept, callee: c, pos: bits, uni: bits, unsat });
            }
        }
        None
    }

    fn state_name(&self, u: usize) -> String {
        if u == self.accept {
            "uA".into()
        } else if Some(u) == self.reject {
            "uR".into()
        } else {
            format!("u{u}")
        }
    }

    fn build(&self, edges: &[SEdge], formulas: &[Conjunction]) -> Result<Hrm> {
        let mut grouped: BTreeMap<(usize, usize, usize), Vec<Conjunction>> = BTreeMap::new();
        for (e, f) in edges.iter().zip(formulas) {
            grouped.entry((e.from, e.to, e.callee)).or_default().push(*f);
        }
        let root = MachineSpec {
            id: self.task.root_name.clone(),
            states: (0..self.num_states).map(|u| self.state_name(u)).collect(),
            initial: "u0".into(),
            accepting: vec!["uA".into()],
            rejecting: self.reject.map(|_| "uR".to_string()).into_iter().collect(),
            edges: grouped
                .into_iter()
                .map(|((from, to, c), disjuncts)| EdgeSpec {
                    from: self.state_name(from),
                    to: self.state_name(to),
                    call: self.callees[c].name.clone(),
                    formula: self.task.props.format(&Dnf::from_disjuncts(disjuncts)),
                })
                .collect(),
        };
        let mut machines = vec![root];
        machines.extend(self.library.iter().cloned());
        let spec = HrmSpec {
            propositions: self.task.props.names().to_vec(),
            root: self.task.root_name.clone(),
            machines,
        };
        Hrm::from_spec(&spec).map_err(|e| Error::Induction(format!("internal error: {e}")))
    }
}
