//! Option-based policy learning over a hierarchy.
//!
//! # Options
//!
//! Every satisfiable disjunct `φ` of an edge `(u, ·, Mj)` of machine `Mi`,
//! under an accumulated context `Φ`, yields an option. Calls to the leaf are
//! formula options: they act through primitive actions until a label
//! satisfies `φ ∧ Φ`. Other calls are call options: they select further
//! options inside `Mj` until it accepts.
//!
//! # Option stack
//!
//! The running options form a stack, shallowest first, that ends in exactly
//! one formula option while the agent acts. After each step the stack is
//! trimmed of terminated options by [`terminate_options`] and then completed
//! from the hierarchy's call stack by [`align_option_stack`], so that options
//! taken in hindsight are learned from as well.
//!
//! # Learning
//!
//! Formula options share tabular Q-functions indexed by the root children of
//! a [`FormulaTree`](crate::logic::FormulaTree); every step updates a sampled
//! subset of them from the same experience. Each machine has a Q-function
//! over its calls, updated by SMDP Q-learning when an option started in it
//! reaches its intended next state.

mod agent;
mod qstore;

pub use agent::{Agent, EpisodeRecord, EpisodeStats, FollowOutcome, Mode};
pub use qstore::{choose_update_keys, CallKey, ExplorationSchedule, LearnParams, QStore, UpdateCounters};

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::logic::{Conjunction, Dnf};
use crate::machines::{Advance, Hrm, MachineId, StackItem};

/// An option `ω^{callee, phi}_{machine, state, context}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OptionId {
    pub machine: usize,
    pub state: usize,
    /// `true` or a single conjunction.
    pub context: Conjunction,
    pub callee: MachineId,
    /// The edge disjunct pursued.
    pub phi: Conjunction,
}

impl OptionId {
    pub fn is_formula(&self) -> bool {
        self.callee == MachineId::Leaf
    }

    /// `phi ∧ context`; options are only built when it is satisfiable.
    pub fn goal_formula(&self) -> Conjunction {
        self.phi.and(&self.context).expect("options have satisfiable contexts")
    }

    /// Whether the step's completed calls include this option's edge.
    pub fn achieved(&self, events: &[Advance]) -> Option<usize> {
        events
            .iter()
            .find(|a| {
                a.machine == self.machine
                    && a.from == self.state
                    && a.callee == self.callee
                    && contains(&a.phi, &self.phi)
            })
            .map(|a| a.to)
    }

    /// Readable form such as `M0/u0[true] -> M1 | !rabbit`.
    pub fn describe(&self, hrm: &Hrm) -> String {
        let m = hrm.machine(self.machine);
        let p = hrm.props();
        format!(
            "{}/{}[{}] -> {} | {}",
            m.name(),
            m.state_name(self.state),
            self.context.display(p),
            hrm.callee_name(self.callee),
            self.phi.display(p)
        )
    }
}

/// An option on the stack with the observation and step it started at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunningOption {
    pub id: OptionId,
    pub start_key: u64,
    pub start_t: usize,
}

/// `c ⊆ d`: `c` is `true` and so is `d`, or `c` is a disjunct of `d`.
pub fn contains(d: &Dnf, c: &Conjunction) -> bool {
    d.has_disjunct(c)
}

/// Options available at `(machine, state)` under `context`, in edge and
/// disjunct order, skipping unsatisfiable combinations.
pub fn options_at(hrm: &Hrm, machine: usize, state: usize, context: Conjunction) -> Vec<OptionId> {
    let mut out = Vec::new();
    for e in hrm.machine(machine).out_edges(state) {
        for phi in e.context.disjuncts() {
            if phi.and(&context).is_some() {
                out.push(OptionId { machine, state, context, callee: e.callee, phi });
            }
        }
    }
    out
}

/// All options reachable from the root.
///
/// States of the root and non-initial states of callees are entered with
/// context `true`; the initial state of a callee also carries every context
/// accumulated by the calls reaching it.
pub fn enumerate_options(hrm: &Hrm) -> BTreeSet<OptionId> {
    let mut out = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut work: Vec<(usize, usize, Conjunction)> = Vec::new();
    for i in hrm.reachable() {
        let m = hrm.machine(i);
        for u in 0..m.num_states() {
            let entered_at_rest = i == hrm.root() || u != m.initial() || m.edges().iter().any(|e| e.to == u);
            if entered_at_rest {
                work.push((i, u, Conjunction::TRUE));
            }
        }
    }
    while let Some(item) = work.pop() {
        if !seen.insert(item) {
            continue;
        }
        let (i, u, ctx) = item;
        for o in options_at(hrm, i, u, ctx) {
            if let MachineId::Index(j) = o.callee {
                work.push((j, hrm.machine(j).initial(), o.goal_formula()));
            }
            out.insert(o);
        }
    }
    out
}

/// Whether a call option is represented by an item of the call stack;
/// returns the item's index.
pub fn option_in_stack(o: &OptionId, stack: &[StackItem]) -> Option<usize> {
    stack.iter().position(|it| {
        it.from == o.state
            && it.caller == o.machine
            && it.callee == o.callee
            && contains(&it.phi, &o.phi)
            && contains(&it.context, &o.context)
    })
}

/// Removes terminated options from the deep end.
///
/// Returns `(terminated, remaining)` with the terminated options ordered
/// deepest first. On a terminal observation every option terminates.
pub fn terminate_options(
    stack: &[RunningOption],
    terminal: bool,
    changed: bool,
    call_stack: &[StackItem],
) -> (Vec<RunningOption>, Vec<RunningOption>) {
    if terminal {
        return (stack.iter().rev().copied().collect(), Vec::new());
    }
    let mut remaining = stack.to_vec();
    let mut terminated = Vec::new();
    while let Some(last) = remaining.last() {
        let ends = if last.id.is_formula() { changed } else { option_in_stack(&last.id, call_stack).is_none() };
        if !ends {
            break;
        }
        terminated.push(remaining.pop().expect("non-empty"));
    }
    (terminated, remaining)
}

/// Appends options for the call-stack items not represented in `stack`.
///
/// Derived options start where the shallowest terminated option started,
/// and their contexts are accumulated from its context. A stack item whose
/// satisfied formula has several disjuncts contributes one of them chosen
/// uniformly at random.
pub fn align_option_stack<R: Rng + ?Sized>(
    stack: Vec<RunningOption>,
    call_stack: &[StackItem],
    terminated: &[RunningOption],
    rng: &mut R,
) -> Vec<RunningOption> {
    let Some(shallowest) = terminated.last() else {
        return stack;
    };
    let from = match stack.last() {
        None => 0,
        Some(last) => match option_in_stack(&last.id, call_stack) {
            Some(i) => i + 1,
            None => return stack,
        },
    };
    let mut out = stack;
    let mut ctx = shallowest.id.context;
    for item in &call_stack[from.min(call_stack.len())..] {
        let disjuncts = item.phi.disjuncts();
        let phi = *disjuncts.choose(rng).expect("stack items have satisfied disjuncts");
        out.push(RunningOption {
            id: OptionId { machine: item.caller, state: item.from, context: ctx, callee: item.callee, phi },
            start_key: shallowest.start_key,
            start_t: shallowest.start_t,
        });
        ctx = match ctx.and(&phi) {
            Some(c) => c,
            None => break,
        };
    }
    out
}
