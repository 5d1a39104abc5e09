//! Reference implementations used only by tests.
//!
//! # Root enumeration
//!
//! [`brute_force_sat`] decides whether a root with a given number of states
//! exists by enumerating every assignment of edges to ordered state pairs.
//! States are filled in order and a partial assignment is dropped as soon as
//! some example's run stays inside the assigned states and ends with the
//! wrong verdict. It shares no code with the library's search; callee
//! semantics come from [`Hrm::step`].

use hrm::induction::InductionTask;
use hrm::logic::Label;
use hrm::machines::{Hrm, MachineId, Symbol, TraceKind, Verdict};

/// Structural rules for [`brute_force_sat`].
#[derive(Debug, Clone, Copy)]
pub struct OracleRules {
    pub one_callee: bool,
    /// Literals may not occur with both signs.
    pub no_contradiction: bool,
    pub leaf_positive: bool,
    pub outgoing: bool,
    pub acyclic: bool,
}

impl OracleRules {
    pub fn from_task(task: &InductionTask) -> Self {
        let c = task.constraints;
        Self {
            one_callee: c.one_callee,
            no_contradiction: true,
            leaf_positive: c.leaf_positive,
            outgoing: c.outgoing,
            acyclic: c.acyclic,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct OEdge {
    to: usize,
    /// 0 is the leaf, `k` the callable `k - 1`.
    callee: usize,
    pos: u64,
    neg: u64,
}

impl OEdge {
    fn holds(&self, l: Label) -> bool {
        l.0 & self.pos == self.pos && l.0 & self.neg == 0
    }
}

enum Sim {
    Done(Verdict),
    Unknown,
}

struct Oracle<'a> {
    task: &'a InductionTask,
    rules: OracleRules,
    n: usize,
    accept: usize,
    reject: Option<usize>,
}

impl Oracle<'_> {
    fn exit_ok(&self, callee: usize, l: Label) -> bool {
        callee == 0 || {
            let h = &self.task.callable[callee - 1];
            h.exit_sat(l, MachineId::Index(h.root()))
        }
    }

    fn applicable<'e>(&self, edges: &'e [OEdge], l: Label) -> Vec<&'e OEdge> {
        edges.iter().filter(|e| e.holds(l) && self.exit_ok(e.callee, l)).collect()
    }

    /// Runs the callee from `i`; `Ok(Some(k))` if it accepts on label `k`.
    fn run_callee(h: &Hrm, labels: &[Label], i: usize) -> Result<Option<usize>, Verdict> {
        let mut hs = h.initial_state();
        for (k, &l) in labels.iter().enumerate().skip(i) {
            hs = h.step(&hs, Symbol::Label(l)).map_err(|_| Verdict::None)?;
            match h.verdict(&hs) {
                Verdict::Accept => return Ok(Some(k)),
                Verdict::Reject => return Err(Verdict::Reject),
                Verdict::None => {}
            }
        }
        Ok(None)
    }

    fn simulate(&self, assign: &[Option<Vec<OEdge>>], labels: &[Label]) -> Option<Sim> {
        let mut u = 0;
        let mut i = 0;
        loop {
            if u == self.accept {
                return Some(Sim::Done(Verdict::Accept));
            }
            if Some(u) == self.reject {
                return Some(Sim::Done(Verdict::Reject));
            }
            if i == labels.len() {
                return Some(Sim::Done(Verdict::None));
            }
            let Some(edges) = &assign[u] else {
                return Some(Sim::Unknown);
            };
            let app = self.applicable(edges, labels[i]);
            match app.as_slice() {
                [] => i += 1,
                [e] if e.callee == 0 => {
                    u = e.to;
                    i += 1;
                }
                [e] => match Self::run_callee(&self.task.callable[e.callee - 1], labels, i) {
                    Ok(Some(k)) => {
                        u = e.to;
                        i = k + 1;
                    }
                    Ok(None) => return Some(Sim::Done(Verdict::None)),
                    Err(Verdict::Reject) => return Some(Sim::Done(Verdict::Reject)),
                    Err(_) => return None,
                },
                _ => return None,
            }
        }
    }

    /// Whether some example is already decided wrongly.
    fn refuted(&self, assign: &[Option<Vec<OEdge>>]) -> bool {
        self.task.examples.iter().any(|t| match self.simulate(assign, &t.labels) {
            None => true,
            Some(Sim::Done(v)) => v != t.kind.expected_verdict(),
            Some(Sim::Unknown) => false,
        })
    }

    fn has_cycle(&self, assign: &[Option<Vec<OEdge>>]) -> bool {
        fn visit(s: usize, assign: &[Option<Vec<OEdge>>], mark: &mut [u8]) -> bool {
            match mark[s] {
                1 => return true,
                2 => return false,
                _ => {}
            }
            mark[s] = 1;
            if let Some(edges) = &assign[s] {
                for e in edges {
                    if visit(e.to, assign, mark) {
                        return true;
                    }
                }
            }
            mark[s] = 2;
            false
        }
        let mut mark = vec![0u8; self.n];
        (0..self.n).any(|s| visit(s, assign, &mut mark))
    }

    fn conjunctions(&self, leaf: bool) -> Vec<(u64, u64)> {
        let full = self.task.props.full_mask();
        let mut out = Vec::new();
        for pos in 0..=full {
            for neg in 0..=full {
                if pos & !full != 0 || neg & !full != 0 {
                    continue;
                }
                if self.rules.no_contradiction && pos & neg != 0 {
                    continue;
                }
                if leaf && self.rules.leaf_positive && pos == 0 {
                    continue;
                }
                out.push((pos, neg));
            }
        }
        out
    }

    /// Edge sets one ordered pair can carry.
    fn pair_options(&self, to: usize) -> Vec<Vec<OEdge>> {
        let callees = self.task.callable.len() + 1;
        let per_callee: Vec<Vec<OEdge>> = (0..callees)
            .map(|c| {
                self.conjunctions(c == 0)
                    .into_iter()
                    .map(|(pos, neg)| OEdge { to, callee: c, pos, neg })
                    .collect()
            })
            .collect();
        let mut out = vec![Vec::new()];
        if self.rules.one_callee {
            out.extend(per_callee.into_iter().flatten().map(|e| vec![e]));
        } else {
            for options in per_callee {
                let mut next = Vec::new();
                for base in &out {
                    next.push(base.clone());
                    for e in &options {
                        let mut b = base.clone();
                        b.push(*e);
                        next.push(b);
                    }
                }
                out = next;
            }
        }
        out
    }

    /// Deterministic edge sets for state `u`.
    fn state_options(&self, u: usize) -> Vec<Vec<OEdge>> {
        let mut out = vec![Vec::new()];
        for to in (0..self.n).filter(|&v| v != u) {
            let opts = self.pair_options(to);
            let mut next = Vec::with_capacity(out.len() * opts.len());
            for base in &out {
                for o in &opts {
                    let mut b = base.clone();
                    b.extend_from_slice(o);
                    next.push(b);
                }
            }
            out = next;
        }
        let labels: Vec<Label> = (0..=self.task.props.full_mask()).map(Label).collect();
        out.retain(|edges| {
            (!self.rules.outgoing || !edges.is_empty())
                && labels.iter().all(|&l| self.applicable(edges, l).len() <= 1)
        });
        out
    }

    fn search(&self, order: &[usize], options: &[Vec<Vec<OEdge>>], assign: &mut Vec<Option<Vec<OEdge>>>) -> bool {
        let Some((&u, rest)) = order.split_first() else {
            return !self.refuted(assign);
        };
        for o in &options[u] {
            assign[u] = Some(o.clone());
            if (self.rules.acyclic && self.has_cycle(assign)) || self.refuted(assign) {
                continue;
            }
            if self.search(rest, options, assign) {
                assign[u] = None;
                return true;
            }
        }
        assign[u] = None;
        false
    }
}

/// Whether a root with `task.num_states` states satisfies every example.
pub fn brute_force_sat(task: &InductionTask, rules: OracleRules) -> bool {
    let n = task.num_states;
    let has_deadends = task.examples.iter().any(|t| t.kind == TraceKind::Deadend);
    let min = if has_deadends { 3 } else { 2 };
    if n < min {
        return false;
    }
    let reject = has_deadends.then_some(n - 1);
    let accept = if has_deadends { n - 2 } else { n - 1 };
    let o = Oracle { task, rules, n, accept, reject };
    let order: Vec<usize> = (0..n).filter(|&u| u != accept && Some(u) != reject).collect();
    let mut options = vec![Vec::new(); n];
    for &u in &order {
        options[u] = o.state_options(u);
    }
    let mut assign = vec![None; n];
    for u in [Some(accept), reject].into_iter().flatten() {
        assign[u] = Some(Vec::new());
    }
    o.search(&order, &options, &mut assign)
}
