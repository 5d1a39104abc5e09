use super::*;
use crate::logic::Label;
use crate::machines::fixtures::{book, build, BOOK_PROPS};
use crate::machines::Verdict;

fn props(names: &[&str]) -> PropositionSet {
    PropositionSet::new(names.iter().copied()).unwrap()
}

/// Parses `"a,b|c|"` into labels `{a,b}`, `{c}`, `{}`.
fn labels(p: &PropositionSet, text: &str) -> Vec<Label> {
    if text.is_empty() {
        return Vec::new();
    }
    text.split('|')
        .map(|l| p.label(l.split(',').filter(|s| !s.is_empty())).unwrap())
        .collect()
}

fn trace(p: &PropositionSet, text: &str, kind: TraceKind) -> LabelTrace {
    LabelTrace::new(labels(p, text), kind).unwrap()
}

fn examples(p: &PropositionSet, goals: &[&str], deadends: &[&str], incompletes: &[&str]) -> Vec<LabelTrace> {
    let mut out = Vec::new();
    out.extend(goals.iter().map(|t| trace(p, t, TraceKind::Goal)));
    out.extend(deadends.iter().map(|t| trace(p, t, TraceKind::Deadend)));
    out.extend(incompletes.iter().map(|t| trace(p, t, TraceKind::Incomplete)));
    out
}

fn solve(task: &InductionTask) -> Outcome {
    induce_root(task, Budget::default()).unwrap().outcome
}

fn bucket_task() -> InductionTask {
    let p = props(&["iron", "table", "cow"]);
    let ex = examples(
        &p,
        &["iron|table", "|iron||table", "cow|iron|cow|table", "iron|iron|table"],
        &[],
        &["iron", "table", "table|iron", "cow", "iron|cow", ""],
    );
    InductionTask::new("M0", p, ex)
}

#[test]
fn validity_follows_trace_kind() {
    let h = book();
    let p = h.props().clone();
    let goal = trace(&p, "sugarcane|workbench||rabbit|workbench|table", TraceKind::Goal);
    assert!(check_validity(&h, &goal));
    assert!(check_validity(&h, &trace(&p, "sugarcane", TraceKind::Incomplete)));
    assert!(!check_validity(&h, &trace(&p, "table", TraceKind::Goal)));
    assert_eq!(BOOK_PROPS.len(), p.len());
}

#[test]
fn inconsistent_examples_are_rejected() {
    let p = props(&["a"]);
    let ex = examples(&p, &["a"], &[], &["a"]);
    let task = InductionTask::new("M0", p, ex);
    assert!(matches!(induce_root(&task, Budget::default()), Err(Error::Induction(_))));
    assert!(minimal_induce(&task, 2, Budget::default()).is_err());
}

#[test]
fn bucket_needs_three_states() {
    let task = bucket_task();
    assert!(matches!(solve(&task.clone().with_states(2)), Outcome::Unsat));
    let out = solve(&task.clone().with_states(3));
    let h = out.solution().expect("solution at three states");
    assert_eq!(h.root_machine().num_states(), 3);
    assert_eq!(h.root_machine().num_edges(), 2);
    assert!(task.examples.iter().all(|t| check_validity(h, t)));

    let res = minimal_induce(&task.with_states(6), 2, Budget::default()).unwrap();
    assert_eq!(res.stats.num_states, 3);
    assert_eq!(res.stats.attempts.get(&2).map(String::as_str), Some("unsat"));
    assert!(res.outcome.is_sat());
}

#[test]
fn learned_formulas_are_generalized() {
    let task = bucket_task().with_states(3);
    let h = solve(&task).solution().cloned().unwrap();
    let m = h.root_machine();
    let p = h.props();
    let mut formulas: Vec<String> = m.edges().iter().map(|e| p.format(&e.context)).collect();
    formulas.sort();
    assert_eq!(formulas, vec!["iron", "table"]);
}

#[test]
fn deadend_examples_add_a_rejecting_state() {
    let p = props(&["a", "b", "c"]);
    let ex = examples(&p, &["a|b"], &["c", "a|c"], &["a", "b"]);
    let task = InductionTask::new("M0", p, ex);
    assert_eq!(task.min_states(), 3);
    let res = minimal_induce(&task.clone().with_states(6), 1, Budget::default()).unwrap();
    assert_eq!(res.stats.num_states, 4);
    let h = res.outcome.solution().unwrap();
    assert_eq!(h.root_machine().rejecting().len(), 1);
    assert!(task.examples.iter().all(|t| check_validity(h, t)));
}

#[test]
fn callable_machines_are_used() {
    let p = props(&["a", "b", "c"]);
    let sub = build(
        &["a", "b", "c"],
        &[("S", &["u0", "u1", "uA"], &["uA"], &[], &[("u0", "u1", "leaf", "a"), ("u1", "uA", "leaf", "b")])],
        "S",
    );
    let ex = examples(&p, &["a|b|c", "a|c|b|c"], &[], &["a|b", "c", "a|c", "b|c", "c|a|b"]);
    let task = InductionTask::new("M0", p, ex).with_callable(vec![sub]).with_states(3);
    let h = solve(&task).solution().cloned().expect("solution calling S");
    assert_eq!(h.root_machine().num_states(), 3);
    assert_eq!(h.height().unwrap(), 2);
    assert!(task.examples.iter().all(|t| check_validity(&h, t)));
    assert!(matches!(solve(&task.with_states(2)), Outcome::Unsat));
}

#[test]
fn root_name_clash_is_an_error() {
    let p = props(&["a"]);
    let sub = build(&["a"], &[("M0", &["u0", "uA"], &["uA"], &[], &[("u0", "uA", "leaf", "a")])], "M0");
    let task = InductionTask::new("M0", p.clone(), examples(&p, &["a"], &[], &[])).with_callable(vec![sub]);
    assert!(induce_root(&task, Budget::default()).is_err());
}

#[test]
fn disjunct_limit_is_enforced() {
    let p = props(&["a", "b", "c"]);
    let ex = examples(&p, &["a", "b"], &[], &["c", ""]);
    let mut task = InductionTask::new("M0", p, ex).with_states(2);
    assert!(matches!(solve(&task), Outcome::Unsat));
    task.kappa = 2;
    let h = solve(&task).solution().cloned().unwrap();
    assert_eq!(h.root_machine().num_edges(), 1);
    assert_eq!(h.root_machine().edges()[0].context.disjuncts().len(), 2);
}

#[test]
fn leaf_positive_constraint_is_load_bearing() {
    let p = props(&["a"]);
    let ex = vec![LabelTrace::new(vec![Label::EMPTY], TraceKind::Goal).unwrap()];
    let mut task = InductionTask::new("M0", p, ex).with_states(2);
    assert!(matches!(solve(&task), Outcome::Unsat));
    task.constraints.leaf_positive = false;
    assert!(solve(&task).is_sat());
}

#[test]
fn outgoing_constraint_is_load_bearing() {
    let p = props(&["a", "b"]);
    let ex = examples(&p, &["b"], &[], &["a|a,b", "a|a", "a|b", "a|"]);
    let mut task = InductionTask::new("M0", p, ex).with_states(3);
    assert!(matches!(solve(&task), Outcome::Unsat));
    task.constraints.outgoing = false;
    assert!(solve(&task).is_sat());
}

#[test]
fn acyclicity_constraint_is_load_bearing() {
    let p = props(&["a", "b", "c"]);
    let ex = examples(&p, &["c", "a|b|c"], &[], &["a|c", "a|b", "a|b|a|c"]);
    let mut task = InductionTask::new("M0", p, ex).with_states(3);
    assert!(matches!(solve(&task), Outcome::Unsat));
    task.constraints.acyclic = false;
    let h = solve(&task).solution().cloned().unwrap();
    assert!(h.validate().is_valid());
}

#[test]
fn one_callee_constraint_is_load_bearing() {
    let p = props(&["a", "b"]);
    let m1 = build(&["a", "b"], &[("M1", &["u0", "uA"], &["uA"], &[], &[("u0", "uA", "leaf", "a")])], "M1");
    let m2 = build(&["a", "b"], &[("M2", &["u0", "uA"], &["uA"], &[], &[("u0", "uA", "leaf", "b")])], "M2");
    let ex = examples(&p, &["a", "b"], &[], &[]);
    let mut task = InductionTask::new("M0", p, ex).with_callable(vec![m1, m2]).with_states(2);
    assert!(matches!(solve(&task), Outcome::Unsat));
    task.constraints.one_callee = false;
    let h = solve(&task).solution().cloned().unwrap();
    assert_eq!(h.root_machine().num_edges(), 2);
}

#[test]
fn search_is_deterministic() {
    let task = bucket_task().with_states(4);
    let a = solve(&task).solution().cloned().unwrap();
    let b = solve(&task).solution().cloned().unwrap();
    assert_eq!(a, b);
}

#[test]
fn node_budget_yields_timeout() {
    let task = bucket_task().with_states(3);
    let res = induce_root(&task, Budget { max_nodes: 1, time_limit: None }).unwrap();
    assert!(matches!(res.outcome, Outcome::Timeout));
    let res = minimal_induce(&task, 2, Budget { max_nodes: 1, time_limit: None }).unwrap();
    assert!(matches!(res.outcome, Outcome::Timeout));
    assert_eq!(res.stats.num_states, 2);
}

#[test]
fn empty_example_set_gives_a_valid_root() {
    let p = props(&["a"]);
    let task = InductionTask::new("M0", p, Vec::new()).with_states(3);
    let h = solve(&task).solution().cloned().unwrap();
    assert!(h.validate().is_valid());
    assert_eq!(h.classify(&[]).unwrap(), Verdict::None);
}
