//! Shared helpers for integration tests: random hierarchy generation and
//! independent reference implementations.

#![allow(dead_code)]

pub mod oracle;

use hrm::induction::InductionTask;
use hrm::logic::{Conjunction, Dnf, Label, PropositionSet};
use hrm::machines::{Hrm, LabelTrace, MachineId, RewardMachine, TraceKind, Verdict};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bounds for [`random_hrm`].
#[derive(Debug, Clone, Copy)]
pub struct RandomHrmParams {
    pub props: usize,
    pub max_height: usize,
    pub max_states: usize,
    pub max_machines_per_level: usize,
}

fn random_conj<R: Rng>(rng: &mut R, n_props: usize, allow_true: bool) -> Conjunction {
    loop {
        let mut c = Conjunction::TRUE;
        let k = rng.gen_range(if allow_true { 0 } else { 1 }..=2);
        for _ in 0..k {
            let p = rng.gen_range(0..n_props);
            if rng.gen_bool(0.7) {
                c.pos |= 1 << p;
            } else {
                c.neg |= 1 << p;
            }
        }
        if c.is_satisfiable() && (allow_true || c.pos != 0) {
            return c;
        }
    }
}

fn random_machine<R: Rng>(
    rng: &mut R,
    name: String,
    n_props: usize,
    callees: &[usize],
    max_states: usize,
) -> RewardMachine {
    let n = rng.gen_range(2..=max_states);
    let with_reject = n >= 3 && rng.gen_bool(0.25);
    let mut names: Vec<String> = (0..n - 1).map(|i| format!("u{i}")).collect();
    names.push("uA".into());
    let mut m = RewardMachine::new(name, names).unwrap();
    let acc = n - 1;
    m.set_accepting(acc).unwrap();
    let rej = if with_reject {
        let r = n - 2;
        m.set_rejecting(r).unwrap();
        Some(r)
    } else {
        None
    };
    let live: Vec<usize> = (0..n).filter(|&u| u != acc && Some(u) != rej).collect();
    for &u in &live {
        let k = rng.gen_range(1..=2);
        for _ in 0..k {
            let to = if u == *live.last().unwrap() && rng.gen_bool(0.6) {
                acc
            } else {
                rng.gen_range(0..n)
            };
            let callee = if !callees.is_empty() && rng.gen_bool(0.7) {
                MachineId::Index(*callees.choose(rng).unwrap())
            } else {
                MachineId::Leaf
            };
            let ctx = random_conj(rng, n_props, callee != MachineId::Leaf);
            let _ = m.add_edge(u, to, callee, Dnf::conj(ctx));
        }
    }
    m
}

/// A random hierarchy that passes validation, or `None` after many attempts.
pub fn random_hrm<R: Rng>(rng: &mut R, p: RandomHrmParams) -> Option<Hrm> {
    let names: Vec<String> = (0..p.props).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
    let props = PropositionSet::new(names).unwrap();
    let height = rng.gen_range(1..=p.max_height);
    for _ in 0..2000 {
        let mut machines = Vec::new();
        let mut below: Vec<usize> = Vec::new();
        for level in 1..=height {
            let count = if level == height { 1 } else { rng.gen_range(1..=p.max_machines_per_level) };
            let mut this_level = Vec::new();
            for _ in 0..count {
                let idx = machines.len();
                let name = format!("M{idx}");
                machines.push(random_machine(rng, name, p.props, &below, p.max_states));
                this_level.push(idx);
            }
            below.extend(this_level);
        }
        let root = machines.len() - 1;
        let h = Hrm::new(props.clone(), machines, root).unwrap();
        if h.height().unwrap() == height && h.validate().is_valid() {
            return Some(h);
        }
    }
    None
}

/// An induction problem with the largest state count to compare at.
pub struct InductionFixture {
    pub name: String,
    pub task: InductionTask,
    pub rules: oracle::OracleRules,
}

fn props_ab(n: usize) -> PropositionSet {
    PropositionSet::new((0..n).map(|i| ((b'a' + i as u8) as char).to_string())).unwrap()
}

/// Parses `"a,b|c|"` into labels `{a,b}`, `{c}`, `{}`.
pub fn parse_labels(p: &PropositionSet, text: &str) -> Vec<Label> {
    if text.is_empty() {
        return Vec::new();
    }
    text.split('|').map(|l| p.label(l.split(',').filter(|s| !s.is_empty())).unwrap()).collect()
}

pub fn examples(p: &PropositionSet, goals: &[&str], deadends: &[&str], incompletes: &[&str]) -> Vec<LabelTrace> {
    let kinds = [(goals, TraceKind::Goal), (deadends, TraceKind::Deadend), (incompletes, TraceKind::Incomplete)];
    kinds
        .iter()
        .flat_map(|(ts, k)| ts.iter().map(move |t| LabelTrace::new(parse_labels(p, t), *k).unwrap()))
        .collect()
}

fn single_edge_machine(p: &PropositionSet, name: &str, formula: &str) -> Hrm {
    let mut m = RewardMachine::new(name, ["u0", "uA"]).unwrap();
    m.set_accepting(1).unwrap();
    m.add_edge(0, 1, MachineId::Leaf, p.parse(formula).unwrap()).unwrap();
    Hrm::new(p.clone(), vec![m], 0).unwrap()
}

fn sequence_machine(p: &PropositionSet, name: &str, first: &str, second: &str) -> Hrm {
    let mut m = RewardMachine::new(name, ["u0", "u1", "uA"]).unwrap();
    m.set_accepting(2).unwrap();
    m.add_edge(0, 1, MachineId::Leaf, p.parse(first).unwrap()).unwrap();
    m.add_edge(1, 2, MachineId::Leaf, p.parse(second).unwrap()).unwrap();
    Hrm::new(p.clone(), vec![m], 0).unwrap()
}

/// Example traces labeled by `truth`, each cut where its verdict is decided.
pub fn labeled_traces<R: Rng>(rng: &mut R, truth: &Hrm, count: usize, max_len: usize) -> Vec<LabelTrace> {
    let full = truth.props().full_mask();
    let mut out: Vec<LabelTrace> = Vec::new();
    for _ in 0..count {
        let len = rng.gen_range(1..=max_len);
        let mut labels = Vec::new();
        let mut kind = TraceKind::Incomplete;
        for _ in 0..len {
            labels.push(Label(rng.gen_range(0..=full)));
            match truth.classify(&labels).unwrap() {
                Verdict::Accept => kind = TraceKind::Goal,
                Verdict::Reject => kind = TraceKind::Deadend,
                Verdict::None => continue,
            }
            break;
        }
        let t = LabelTrace::new(labels, kind).unwrap();
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

fn fixture(name: impl Into<String>, task: InductionTask) -> InductionFixture {
    let rules = oracle::OracleRules::from_task(&task);
    InductionFixture { name: name.into(), task, rules }
}

/// Fixtures with at most four propositions, one disjunct per edge and at
/// most four root states.
pub fn induction_fixtures() -> Vec<InductionFixture> {
    let mut out = Vec::new();
    let p1 = props_ab(1);
    let p2 = props_ab(2);
    let p3 = props_ab(3);

    let t = InductionTask::new("R", p1.clone(), vec![LabelTrace::new(vec![Label::EMPTY], TraceKind::Goal).unwrap()]);
    out.push(fixture("leaf-positive", t.clone().with_states(3)));
    let mut off = t.with_states(3);
    off.constraints.leaf_positive = false;
    out.push(fixture("leaf-positive-off", off));

    let t = InductionTask::new("R", p2.clone(), examples(&p2, &["b"], &[], &["a|a,b", "a|a", "a|b", "a|"]));
    out.push(fixture("outgoing", t.clone().with_states(4)));
    let mut off = t.with_states(3);
    off.constraints.outgoing = false;
    out.push(fixture("outgoing-off", off));

    let t = InductionTask::new("R", p3.clone(), examples(&p3, &["c", "a|b|c"], &[], &["a|c", "a|b", "a|b|a|c"]));
    out.push(fixture("acyclic", t.clone().with_states(3)));
    let mut off = t.with_states(3);
    off.constraints.acyclic = false;
    out.push(fixture("acyclic-off", off));

    let callables = vec![single_edge_machine(&p2, "A", "a"), single_edge_machine(&p2, "B", "b")];
    let t = InductionTask::new("R", p2.clone(), examples(&p2, &["a", "b"], &[], &[])).with_callable(callables);
    out.push(fixture("one-callee", t.clone().with_states(3)));
    let mut off = t.with_states(2);
    off.constraints.one_callee = false;
    out.push(fixture("one-callee-off", off));

    let t = InductionTask::new("R", p2.clone(), examples(&p2, &["a|b", "b|a|b"], &["b|b"], &["a", "b", "a|a"]));
    out.push(fixture("deadend", t.with_states(4)));

    let seq = sequence_machine(&p2, "S", "a", "b");
    let t = InductionTask::new("R", p2.clone(), examples(&p2, &["a|b|a|b", "a|a|b|b|a|b"], &[], &["a|b", "b|a|b", "a|b|b|a"]))
        .with_callable(vec![seq.clone()]);
    out.push(fixture("callable-sequence", t.with_states(4)));

    let p4 = props_ab(4);
    let t = InductionTask::new("R", p4.clone(), examples(&p4, &["a|d", "b|d", "a,c|d"], &[], &["d", "a", "c|d", "b,c|d"]));
    out.push(fixture("four-props", t.with_states(3)));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let flat = RandomHrmParams { props: 2, max_height: 1, max_states: 4, max_machines_per_level: 1 };
    for k in 0..12 {
        let truth = random_hrm(&mut rng, flat).unwrap();
        let ex = labeled_traces(&mut rng, &truth, 25, 6);
        out.push(fixture(format!("random-flat-{k}"), InductionTask::new("R", p2.clone(), ex).with_states(4)));
    }
    let flat3 = RandomHrmParams { props: 3, max_height: 1, max_states: 3, max_machines_per_level: 1 };
    for k in 0..6 {
        let truth = random_hrm(&mut rng, flat3).unwrap();
        let ex = labeled_traces(&mut rng, &truth, 20, 5);
        out.push(fixture(format!("random-flat3-{k}"), InductionTask::new("R", p3.clone(), ex).with_states(3)));
    }
    for k in 0..6 {
        let truth = random_hrm(&mut rng, flat).unwrap();
        let mut ex = labeled_traces(&mut rng, &truth, 8, 4);
        for t in ex.iter_mut().step_by(3) {
            if t.kind == TraceKind::Incomplete && !t.labels.is_empty() {
                t.kind = TraceKind::Goal;
            }
        }
        out.push(fixture(format!("random-relabeled-{k}"), InductionTask::new("R", p2.clone(), ex).with_states(4)));
    }
    for k in 0..4 {
        let other = single_edge_machine(&p2, "B", if k % 2 == 0 { "b" } else { "a&!b" });
        let mut m = RewardMachine::new("T", ["u0", "u1", "uA"]).unwrap();
        m.set_accepting(2).unwrap();
        m.add_edge(0, 1, MachineId::Index(1), Dnf::tt()).unwrap();
        m.add_edge(1, 2, MachineId::Leaf, p2.parse(if k < 2 { "a" } else { "b" }).unwrap()).unwrap();
        let b = other.machine(0).clone();
        let truth = Hrm::new(p2.clone(), vec![m, b], 0).unwrap();
        let ex = labeled_traces(&mut rng, &truth, 10, 5);
        let t = InductionTask::new("R", p2.clone(), ex).with_callable(vec![other, seq.clone()]);
        out.push(fixture(format!("random-callable-{k}"), t.with_states(3)));
    }
    out
}
