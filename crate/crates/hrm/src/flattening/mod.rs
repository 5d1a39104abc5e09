//! Flattening a hierarchy into a single machine, equivalence checking, and
//! size analysis of flattened hierarchies.
//!
//! # Construction
//!
//! Machines are flattened bottom-up by height. A call edge `(u, u', Mj)` is
//! replaced by a copy of the already-flat `Mj`: its initial state is played by
//! `u`, its accepting states by `u'`, and every other state `v` is cloned as
//! `v@u,u',Mj`. The call context is conjoined onto the edges leaving the
//! callee's initial state only. Callees whose initial state has incoming
//! edges are first rewritten by [`transform_initial`] so that the context is
//! checked only when the call starts.
//!
//! # Equivalence
//!
//! Two hierarchies are equivalent on a trace when both accept, both reject,
//! or neither does. [`check_equivalence`] tests all traces up to a length by
//! a breadth-first search over pairs of hierarchy states, counting how many
//! traces lead to each pair, or tests seeded random traces.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{Dnf, Label, PropositionSet};
use crate::machines::{HierarchyState, Hrm, MachineId, RewardMachine, Symbol, Verdict};

/// Rewrites a flat machine so that its initial state has no incoming edges.
///
/// Edges into `u0` are redirected to a fresh state `u0^` that copies the
/// outgoing edges of `u0`. A machine without edges into `u0` is returned
/// unchanged.
pub fn transform_initial(m: &RewardMachine) -> Result<RewardMachine> {
    if m.edges().iter().any(|e| e.callee != MachineId::Leaf) {
        return Err(Error::NotFlat(format!("machine '{}' calls other machines", m.name())));
    }
    let u0 = m.initial();
    if !m.edges().iter().any(|e| e.to == u0) {
        return Ok(m.clone());
    }
    let mut hat = format!("{}^", m.state_name(u0));
    while m.states().contains(&hat) {
        hat.push('^');
    }
    let mut out = RewardMachine::new(m.name(), m.states().iter().cloned())?;
    let uh = out.add_state(hat)?;
    out.set_initial(u0)?;
    for &a in m.accepting() {
        out.set_accepting(a)?;
    }
    for &r in m.rejecting() {
        out.set_rejecting(r)?;
    }
    let redirected: Vec<(usize, usize, Dnf)> = m
        .edges()
        .iter()
        .map(|e| (e.from, if e.to == u0 { uh } else { e.to }, e.context.clone()))
        .collect();
    for (from, to, ctx) in &redirected {
        out.add_edge(*from, *to, MachineId::Leaf, ctx.clone())?;
    }
    for (from, to, ctx) in &redirected {
        if *from == u0 {
            out.add_edge(uh, *to, MachineId::Leaf, ctx.clone())?;
        }
    }
    Ok(out)
}

fn add_or_merge(m: &mut RewardMachine, from: usize, to: usize, ctx: Dnf) -> Result<()> {
    match m.find_edge(from, to, MachineId::Leaf) {
        Some(e) => {
            let merged = e.context.or(&ctx);
            m.set_edge_context(from, to, MachineId::Leaf, merged)
        }
        None => m.add_edge(from, to, MachineId::Leaf, ctx),
    }
}

/// Flattens one machine given flat versions of all its callees.
fn flatten_machine(hrm: &Hrm, i: usize, flat: &HashMap<usize, RewardMachine>) -> Result<RewardMachine> {
    let m = hrm.machine(i);
    let mut out = RewardMachine::new(m.name(), m.states().iter().cloned())?;
    out.set_initial(m.initial())?;
    for &a in m.accepting() {
        out.set_accepting(a)?;
    }
    for &r in m.rejecting() {
        out.set_rejecting(r)?;
    }
    for e in m.edges() {
        let j = match e.callee {
            MachineId::Leaf => {
                add_or_merge(&mut out, e.from, e.to, e.context.clone())?;
                continue;
            }
            MachineId::Index(j) => j,
        };
        let callee = transform_initial(&flat[&j])?;
        let c0 = callee.initial();
        let mut clone = vec![usize::MAX; callee.num_states()];
        for v in 0..callee.num_states() {
            if v == c0 || callee.is_accepting(v) {
                continue;
            }
            let name = format!(
                "{}@{},{},{}",
                callee.state_name(v),
                m.state_name(e.from),
                m.state_name(e.to),
                callee.name()
            );
            clone[v] = out.add_state(name)?;
            if callee.is_rejecting(v) {
                out.set_rejecting(clone[v])?;
            }
        }
        for ce in callee.edges() {
            let (src, ctx) = if ce.from == c0 {
                (e.from, ce.context.and(&e.context))
            } else {
                (clone[ce.from], ce.context.clone())
            };
            if ctx.is_false() || src == usize::MAX {
                continue;
            }
            let dst = if callee.is_accepting(ce.to) { e.to } else { clone[ce.to] };
            if dst == usize::MAX {
                continue;
            }
            add_or_merge(&mut out, src, dst, ctx)?;
        }
    }
    Ok(out)
}

/// Equivalent hierarchy consisting of a single machine.
pub fn flatten(hrm: &Hrm) -> Result<Hrm> {
    let report = hrm.validate();
    if !report.is_valid() {
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidMachine(msgs.join("; ")));
    }
    let mut order = hrm.reachable();
    let mut heights = HashMap::new();
    for &i in &order {
        heights.insert(i, hrm.height_of(MachineId::Index(i))?);
    }
    order.sort_by_key(|i| heights[i]);
    let mut flat = HashMap::new();
    for &i in &order {
        let f = flatten_machine(hrm, i, &flat)?;
        flat.insert(i, f);
    }
    let root = flat.remove(&hrm.root()).expect("root is reachable");
    Hrm::new(hrm.props().clone(), vec![root], 0)
}

/// Source of traces for [`check_equivalence`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceSource {
    /// Every label sequence of length `0..=max_len`.
    Exhaustive { max_len: usize },
    /// `count` traces of length `1..=max_len` with uniformly random labels.
    Random { count: usize, max_len: usize, seed: u64 },
}

/// A trace on which two hierarchies disagree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub trace: Vec<Vec<String>>,
    pub left: Verdict,
    pub right: Verdict,
    /// Number of tested traces reaching the same pair of hierarchy states.
    pub multiplicity: u64,
}

/// Outcome of [`check_equivalence`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub traces_tested: u64,
    pub mismatching_traces: u64,
    /// One witness per distinct disagreement, capped at [`MAX_WITNESSES`].
    pub mismatches: Vec<Mismatch>,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.mismatching_traces == 0
    }
}

/// Largest number of witnesses kept in a report.
pub const MAX_WITNESSES: usize = 100;

fn names(props: &PropositionSet, trace: &[Label]) -> Vec<Vec<String>> {
    trace.iter().map(|l| props.label_names(*l).into_iter().map(String::from).collect()).collect()
}

/// Compares verdicts of two hierarchies over the same propositions.
pub fn check_equivalence(a: &Hrm, b: &Hrm, source: &TraceSource) -> Result<EquivalenceReport> {
    if a.props() != b.props() {
        return Err(Error::Config("hierarchies use different proposition sets".into()));
    }
    let props = a.props();
    let mut report = EquivalenceReport { traces_tested: 0, mismatching_traces: 0, mismatches: Vec::new() };
    let record = |report: &mut EquivalenceReport, trace: &[Label], va: Verdict, vb: Verdict, n: u64| {
        report.traces_tested += n;
        if va != vb {
            report.mismatching_traces += n;
            if report.mismatches.len() < MAX_WITNESSES {
                report.mismatches.push(Mismatch { trace: names(props, trace), left: va, right: vb, multiplicity: n });
            }
        }
    };
    match *source {
        TraceSource::Exhaustive { max_len } => {
            if props.len() > 16 {
                return Err(Error::Config("exhaustive checking needs at most 16 propositions".into()));
            }
            let alphabet = 1u64 << props.len();
            type Frontier = HashMap<(HierarchyState, HierarchyState), (u64, Vec<Label>)>;
            let mut frontier: Frontier = HashMap::new();
            frontier.insert((a.initial_state(), b.initial_state()), (1, Vec::new()));
            for depth in 0..=max_len {
                let mut entries: Vec<_> = frontier.into_iter().collect();
                entries.sort_by(|x, y| x.1 .1.cmp(&y.1 .1));
                for ((sa, sb), (n, witness)) in &entries {
                    record(&mut report, witness, a.verdict(sa), b.verdict(sb), *n);
                }
                if depth == max_len {
                    break;
                }
                let mut next: Frontier = HashMap::new();
                for ((sa, sb), (n, witness)) in entries {
                    for l in 0..alphabet {
                        let sym = Symbol::Label(Label(l));
                        let key = (a.step(&sa, sym)?, b.step(&sb, sym)?);
                        let entry = next.entry(key).or_insert_with(|| {
                            let mut w = witness.clone();
                            w.push(Label(l));
                            (0, w)
                        });
                        entry.0 = entry.0.saturating_add(n);
                    }
                }
                frontier = next;
            }
        }
        TraceSource::Random { count, max_len, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let full = props.full_mask();
            for _ in 0..count {
                let len = rng.gen_range(1..=max_len.max(1));
                let trace: Vec<Label> = (0..len).map(|_| Label(rng.gen::<u64>() & full)).collect();
                record(&mut report, &trace, a.classify(&trace)?, b.classify(&trace)?, 1);
            }
        }
    }
    Ok(report)
}

/// Per-level parameters of a uniform hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelParams {
    /// Number of machines at this level.
    pub machines: u64,
    /// States per machine.
    pub states: u64,
    /// Edges per non-accepting state.
    pub edges: u64,
}

/// Abstract description of a hierarchy; `levels[0]` is height 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeProfile {
    pub levels: Vec<LevelParams>,
}

impl SizeProfile {
    /// Same parameters at every level.
    pub fn uniform(height: usize, machines: u64, states: u64, edges: u64) -> Self {
        let mut levels = vec![LevelParams { machines, states, edges }; height];
        if let Some(top) = levels.last_mut() {
            top.machines = 1;
        }
        Self { levels }
    }
}

/// State and edge counts of a hierarchy and of its flattening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeAnalysis {
    pub hrm_states: u128,
    pub hrm_edges: u128,
    pub flat_states: u128,
    pub flat_edges: u128,
}

/// Counts for a [`SizeProfile`].
pub fn analyze_size(p: &SizeProfile) -> Result<SizeAnalysis> {
    if p.levels.is_empty() {
        return Err(Error::Config("profile needs at least one level".into()));
    }
    if p.levels.last().map(|l| l.machines) != Some(1) {
        return Err(Error::Config("the top level must hold exactly one machine".into()));
    }
    if p.levels.iter().any(|l| l.states < 2 || l.edges < 1 || l.machines < 1) {
        return Err(Error::Config("each level needs at least two states, one edge and one machine".into()));
    }
    let mut hrm_states = 0u128;
    let mut hrm_edges = 0u128;
    let (mut fs, mut fe) = (0u128, 0u128);
    for (i, l) in p.levels.iter().enumerate() {
        let (n, u, e) = (l.machines as u128, l.states as u128, l.edges as u128);
        hrm_states += n * u;
        hrm_edges += n * (u - 1) * e;
        if i == 0 {
            fs = u;
            fe = (u - 1) * e;
        } else {
            fs = u + (fs - 2) * (u - 1) * e;
            fe *= (u - 1) * e;
        }
    }
    Ok(SizeAnalysis { hrm_states, hrm_edges, flat_states: fs, flat_edges: fe })
}

/// Hierarchy of height `h` whose flattening has `2^h + 1` states.
///
/// `M1` is the chain `a ; b`; each `Mi` calls `M(i-1)` twice in sequence.
pub fn make_parametric_hrm(h: usize, a: &str, b: &str) -> Result<Hrm> {
    if h == 0 {
        return Err(Error::Config("height must be at least 1".into()));
    }
    let props = PropositionSet::new([a, b])?;
    let mut machines = Vec::with_capacity(h);
    for i in 1..=h {
        let mut m = RewardMachine::new(format!("M{i}"), ["u0", "u1", "uA"])?;
        m.set_accepting(2)?;
        if i == 1 {
            m.add_edge(0, 1, MachineId::Leaf, props.parse(a)?)?;
            m.add_edge(1, 2, MachineId::Leaf, props.parse(b)?)?;
        } else {
            m.add_edge(0, 1, MachineId::Index(i - 2), Dnf::True)?;
            m.add_edge(1, 2, MachineId::Index(i - 2), Dnf::True)?;
        }
        machines.push(m);
    }
    Hrm::new(props, machines, h - 1)
}
