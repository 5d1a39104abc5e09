//! Task catalog with handcrafted reference hierarchies.
//!
//! # CraftWorld
//!
//! | level | tasks                                                     |
//! |-------|-----------------------------------------------------------|
//! | 1     | Batter, Bucket, Compass, Leather, Paper, Quill, Sugar     |
//! | 2     | Book, Map, MilkBucket                                     |
//! | 3     | BookQuill, MilkBucketSugar                                |
//! | 4     | Cake                                                      |
//!
//! # WaterWorld
//!
//! | level | tasks                          |
//! |-------|--------------------------------|
//! | 1     | bc, my, rg                     |
//! | 2     | bc&my, cmy, rg&bc, rg&my, rgb  |
//! | 3     | rgb&cmy                        |
//!
//! Every machine is named after its task, so a hierarchy for a task contains
//! the machines of all the tasks it depends on.
//!
//! # Dead ends
//!
//! [`add_deadends`] gives every machine a rejecting state `uR` entered from
//! any non-terminal state on the dead-end proposition, and conjoins the
//! negated proposition onto every other edge.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CraftWorld, Layout, WaterWorld, DEADEND_COLOR, LAVA};
use crate::error::{Error, Result};
use crate::logic::{Conjunction, Dnf, Label, PropositionSet};
use crate::machines::{Hrm, HrmSpec, LabelTrace, MachineId, MachineSpec, EdgeSpec, RewardMachine, Symbol, TraceKind, Verdict};

/// Environment family of a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    CraftWorld,
    WaterWorld,
}

impl Domain {
    /// Proposition set without the dead-end proposition.
    pub fn base_props(self) -> PropositionSet {
        match self {
            Domain::CraftWorld => CraftWorld::props_for(Layout::Op),
            Domain::WaterWorld => WaterWorld::props_for(false),
        }
        .expect("catalog propositions are valid")
    }

    pub fn deadend_prop(self) -> &'static str {
        match self {
            Domain::CraftWorld => LAVA,
            Domain::WaterWorld => DEADEND_COLOR,
        }
    }
}

type EdgeDef = (&'static str, &'static str, &'static str, &'static str);

struct RootDef {
    name: &'static str,
    domain: Domain,
    edges: &'static [EdgeDef],
}

const fn cw(name: &'static str, edges: &'static [EdgeDef]) -> RootDef {
    RootDef { name, domain: Domain::CraftWorld, edges }
}

const fn ww(name: &'static str, edges: &'static [EdgeDef]) -> RootDef {
    RootDef { name, domain: Domain::WaterWorld, edges }
}

const CATALOG: &[RootDef] = &[
    cw("Batter", &[
        ("u0", "u1", "leaf", "wheat"),
        ("u0", "u2", "leaf", "chicken&!wheat"),
        ("u1", "u3", "leaf", "chicken"),
        ("u2", "u3", "leaf", "wheat"),
        ("u3", "uA", "leaf", "table"),
    ]),
    cw("Bucket", &[("u0", "u1", "leaf", "iron"), ("u1", "uA", "leaf", "table")]),
    cw("Compass", &[
        ("u0", "u1", "leaf", "iron"),
        ("u0", "u2", "leaf", "redstone&!iron"),
        ("u1", "u3", "leaf", "redstone"),
        ("u2", "u3", "leaf", "iron"),
        ("u3", "uA", "leaf", "workbench"),
    ]),
    cw("Leather", &[("u0", "u1", "leaf", "rabbit"), ("u1", "uA", "leaf", "workbench")]),
    cw("Paper", &[("u0", "u1", "leaf", "sugarcane"), ("u1", "uA", "leaf", "workbench")]),
    cw("Quill", &[
        ("u0", "u1", "leaf", "squid"),
        ("u0", "u2", "leaf", "chicken&!squid"),
        ("u1", "u3", "leaf", "chicken"),
        ("u2", "u3", "leaf", "squid"),
        ("u3", "uA", "leaf", "table"),
    ]),
    cw("Sugar", &[("u0", "u1", "leaf", "sugarcane"), ("u1", "uA", "leaf", "table")]),
    cw("Book", &[
        ("u0", "u1", "Paper", "true"),
        ("u0", "u2", "Leather", "!sugarcane"),
        ("u1", "u3", "Leather", "true"),
        ("u2", "u3", "Paper", "true"),
        ("u3", "uA", "leaf", "table"),
    ]),
    cw("Map", &[
        ("u0", "u1", "Paper", "true"),
        ("u0", "u2", "Compass", "!sugarcane"),
        ("u1", "u3", "Compass", "true"),
        ("u2", "u3", "Paper", "true"),
        ("u3", "uA", "leaf", "table"),
    ]),
    cw("MilkBucket", &[("u0", "u1", "Bucket", "true"), ("u1", "uA", "leaf", "cow")]),
    cw("BookQuill", &[
        ("u0", "u1", "Quill", "true"),
        ("u0", "u2", "Book", "!chicken&!squid"),
        ("u1", "uA", "Book", "true"),
        ("u2", "uA", "Quill", "true"),
    ]),
    cw("MilkBucketSugar", &[
        ("u0", "u1", "Sugar", "true"),
        ("u0", "u2", "MilkBucket", "!sugarcane"),
        ("u1", "uA", "MilkBucket", "true"),
        ("u2", "uA", "Sugar", "true"),
    ]),
    cw("Cake", &[
        ("u0", "u1", "Batter", "true"),
        ("u1", "u2", "MilkBucketSugar", "true"),
        ("u2", "uA", "leaf", "workbench"),
    ]),
    ww("rg", &[("u0", "u1", "leaf", "r"), ("u1", "uA", "leaf", "g")]),
    ww("bc", &[("u0", "u1", "leaf", "b"), ("u1", "uA", "leaf", "c")]),
    ww("my", &[("u0", "u1", "leaf", "m"), ("u1", "uA", "leaf", "y")]),
    ww("rg&bc", &[
        ("u0", "u1", "rg", "!b"),
        ("u0", "u2", "bc", "!r"),
        ("u1", "uA", "bc", "true"),
        ("u2", "uA", "rg", "true"),
    ]),
    ww("bc&my", &[
        ("u0", "u1", "bc", "!m"),
        ("u0", "u2", "my", "!b"),
        ("u1", "uA", "my", "true"),
        ("u2", "uA", "bc", "true"),
    ]),
    ww("rg&my", &[
        ("u0", "u1", "rg", "!m"),
        ("u0", "u2", "my", "!r"),
        ("u1", "uA", "my", "true"),
        ("u2", "uA", "rg", "true"),
    ]),
    ww("rgb", &[("u0", "u1", "rg", "true"), ("u1", "uA", "leaf", "b")]),
    ww("cmy", &[("u0", "u1", "leaf", "c"), ("u1", "uA", "my", "true")]),
    ww("rgb&cmy", &[
        ("u0", "u1", "rgb", "!c"),
        ("u0", "u2", "cmy", "!r"),
        ("u1", "uA", "cmy", "true"),
        ("u2", "uA", "rgb", "true"),
    ]),
];

fn find(name: &str) -> Result<&'static RootDef> {
    CATALOG.iter().find(|d| d.name == name).ok_or_else(|| Error::UnknownTask(name.to_string()))
}

/// Task names of a domain, in catalog order.
pub fn task_names(domain: Domain) -> Vec<&'static str> {
    CATALOG.iter().filter(|d| d.domain == domain).map(|d| d.name).collect()
}

fn machine_spec(def: &RootDef) -> MachineSpec {
    let mut states: Vec<String> = Vec::new();
    for &(from, to, _, _) in def.edges {
        for s in [from, to] {
            if s != "uA" && !states.iter().any(|x| x == s) {
                states.push(s.to_string());
            }
        }
    }
    states.push("uA".into());
    MachineSpec {
        id: def.name.to_string(),
        initial: "u0".into(),
        states,
        accepting: vec!["uA".into()],
        rejecting: vec![],
        edges: def
            .edges
            .iter()
            .map(|&(from, to, call, formula)| EdgeSpec {
                from: from.into(),
                to: to.into(),
                call: call.into(),
                formula: formula.into(),
            })
            .collect(),
    }
}

/// Reference hierarchy of a task, optionally with dead ends.
pub fn ground_truth_hrm(name: &str, with_deadends: bool) -> Result<Hrm> {
    let root = find(name)?;
    let mut order = vec![root];
    let mut i = 0;
    while i < order.len() {
        for &(_, _, call, _) in order[i].edges {
            if call != "leaf" && !order.iter().any(|d| d.name == call) {
                order.push(find(call)?);
            }
        }
        i += 1;
    }
    let spec = HrmSpec {
        propositions: root.domain.base_props().names().to_vec(),
        root: root.name.to_string(),
        machines: order.iter().map(|d| machine_spec(d)).collect(),
    };
    let hrm = Hrm::from_spec(&spec)?;
    if with_deadends {
        add_deadends(&hrm, root.domain.deadend_prop())
    } else {
        Ok(hrm)
    }
}

/// Adds the proposition `prop` and a rejecting state reached on it.
pub fn add_deadends(hrm: &Hrm, prop: &str) -> Result<Hrm> {
    if hrm.props().index_of(prop).is_ok() {
        return Err(Error::DuplicateProposition(prop.to_string()));
    }
    let mut spec = hrm.to_spec();
    spec.propositions.push(prop.to_string());
    let hrm = Hrm::from_spec(&spec)?;
    let props = hrm.props().clone();
    let bit = 1u64 << props.index_of(prop)?;
    let avoid = Conjunction::new(0, bit);
    let mut machines = Vec::with_capacity(hrm.machines().len());
    for m in hrm.machines() {
        let mut out = RewardMachine::new(m.name(), m.states().iter().cloned())?;
        out.set_initial(m.initial())?;
        for &a in m.accepting() {
            out.set_accepting(a)?;
        }
        for &r in m.rejecting() {
            out.set_rejecting(r)?;
        }
        let mut reject = "uR".to_string();
        while m.states().contains(&reject) {
            reject.push('\'');
        }
        let ur = out.add_state(reject)?;
        out.set_rejecting(ur)?;
        for e in m.edges() {
            let ctx = e.context.and_conj(&avoid);
            if !ctx.is_false() {
                out.add_edge(e.from, e.to, e.callee, ctx)?;
            }
        }
        for u in 0..m.num_states() {
            if !m.is_terminal(u) {
                out.add_edge(u, ur, MachineId::Leaf, Dnf::conj(Conjunction::new(bit, 0)))?;
            }
        }
        machines.push(out);
    }
    Hrm::new(props, machines, hrm.root())
}

/// A catalog task.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub name: String,
    pub domain: Domain,
    /// Height of the reference root.
    pub level: usize,
    pub reference: Hrm,
}

/// Catalog entry for a task.
pub fn task_spec(name: &str, with_deadends: bool) -> Result<TaskSpec> {
    let def = find(name)?;
    let reference = ground_truth_hrm(name, with_deadends)?;
    Ok(TaskSpec { name: def.name.to_string(), domain: def.domain, level: reference.height()?, reference })
}

/// Every task of a domain.
pub fn catalog(domain: Domain, with_deadends: bool) -> Result<Vec<TaskSpec>> {
    task_names(domain).into_iter().map(|n| task_spec(n, with_deadends)).collect()
}

/// The empty label and every single-proposition label.
pub fn singleton_alphabet(props: &PropositionSet) -> Vec<Label> {
    std::iter::once(Label::EMPTY).chain((0..props.len()).map(Label::singleton)).collect()
}

/// Samples a trace of the requested kind from `hrm` over `alphabet`.
///
/// Goal and dead-end traces are random walks that take a progressing label
/// with probability one half; dead-end walks end on a rejecting label.
/// Incomplete traces never reach a terminal verdict. Returns `None` when no
/// trace of the kind is found within `max_len` labels.
pub fn sample_trace<R: Rng>(
    hrm: &Hrm,
    alphabet: &[Label],
    kind: TraceKind,
    max_len: usize,
    rng: &mut R,
) -> Result<Option<LabelTrace>> {
    let target_len = rng.gen_range(1..=max_len.max(1));
    let mut hs = hrm.initial_state();
    let mut labels = Vec::new();
    while labels.len() < max_len {
        let mut moves: BTreeMap<u8, Vec<(Label, _)>> = BTreeMap::new();
        for &l in alphabet {
            let next = hrm.step(&hs, Symbol::Label(l))?;
            let class = match hrm.verdict(&next) {
                Verdict::Reject => 0,
                Verdict::Accept => 1,
                Verdict::None if next != hs => 2,
                Verdict::None => 3,
            };
            moves.entry(class).or_default().push((l, next));
        }
        let pick = |classes: &[u8], rng: &mut R| {
            let pool: Vec<&(Label, _)> = classes.iter().filter_map(|c| moves.get(c)).flatten().collect();
            pool.choose(rng).map(|&(l, n)| (*l, n.clone()))
        };
        let last = labels.len() + 1 >= target_len;
        let choice = match kind {
            TraceKind::Incomplete => pick(&[2, 3], rng),
            TraceKind::Deadend if last && moves.contains_key(&0) => pick(&[0], rng),
            TraceKind::Goal | TraceKind::Deadend => {
                if kind == TraceKind::Goal && moves.contains_key(&1) {
                    pick(&[1], rng)
                } else if rng.gen_bool(0.5) && moves.contains_key(&2) {
                    pick(&[2], rng)
                } else {
                    pick(&[2, 3], rng)
                }
            }
        };
        let Some((l, next)) = choice else { return Ok(None) };
        labels.push(l);
        hs = next;
        match (kind, hrm.verdict(&hs)) {
            (TraceKind::Goal, Verdict::Accept) | (TraceKind::Deadend, Verdict::Reject) => {
                return Ok(Some(LabelTrace { labels, kind }));
            }
            (TraceKind::Incomplete, _) if labels.len() >= target_len => {
                return Ok(Some(LabelTrace { labels, kind }));
            }
            _ => {}
        }
    }
    Ok(None)
}
