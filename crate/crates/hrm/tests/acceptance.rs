//! Acceptance criteria, one pass/fail line each.
//!
//! Runs without the libtest harness so the lines are always shown. Every
//! criterion runs even when an earlier one fails; the process exits non-zero
//! if any criterion did.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::oracle::brute_force_sat;
use common::{examples, induction_fixtures, random_hrm, RandomHrmParams};
use hrm::envs::{
    ground_truth_hrm, sample_trace, singleton_alphabet, task_spec, CraftWorld, CraftWorldConfig, EnvConfig, Layout,
    TaskEnv,
};
use hrm::flattening::{analyze_size, check_equivalence, flatten, make_parametric_hrm, SizeProfile, TraceSource};
use hrm::induction::{check_validity, minimal_induce, Budget, InductionTask};
use hrm::lhrm::{lhrm_run, Curriculum, LhrmConfig};
use hrm::logic::{Conjunction, Dnf, FormulaTree, Label, PropositionSet};
use hrm::machines::{load_hrm, Hrm, LabelTrace, MachineId, TraceKind, Verdict, Violation};
use hrm::options::{Agent, LearnParams, Mode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Debug>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| format!("{e:?}"))
}

/// Two-level Book hierarchy over four propositions, with the context of the
/// first call to `M1` configurable.
fn book(ctx: &str) -> Hrm {
    let json = format!(
        r#"{{"propositions":["rabbit","sugarcane","table","workbench"],"root":"M0","machines":[
        {{"id":"M0","states":["u0","u1","u2","u3","uA"],"initial":"u0","accepting":["uA"],"edges":[
            {{"from":"u0","to":"u1","call":"M1","formula":"{ctx}"}},
            {{"from":"u0","to":"u2","call":"M2","formula":"true"}},
            {{"from":"u1","to":"u3","call":"M2","formula":"true"}},
            {{"from":"u2","to":"u3","call":"M1","formula":"true"}},
            {{"from":"u3","to":"uA","call":"leaf","formula":"table"}}]}},
        {{"id":"M1","states":["u0","u1","uA"],"initial":"u0","accepting":["uA"],"edges":[
            {{"from":"u0","to":"u1","call":"leaf","formula":"sugarcane"}},
            {{"from":"u1","to":"uA","call":"leaf","formula":"workbench"}}]}},
        {{"id":"M2","states":["u0","u1","uA"],"initial":"u0","accepting":["uA"],"edges":[
            {{"from":"u0","to":"u1","call":"leaf","formula":"rabbit"}},
            {{"from":"u1","to":"uA","call":"leaf","formula":"workbench"}}]}}]}}"#
    );
    load_hrm(&json).unwrap()
}

fn labels(p: &PropositionSet, names: &[&[&str]]) -> Vec<Label> {
    names.iter().map(|n| p.label(n.iter()).unwrap()).collect()
}

fn worked_traversal() -> Outcome {
    let h = book("!rabbit");
    let trace = labels(h.props(), &[&["sugarcane"], &["workbench"], &[], &["rabbit"], &["workbench"], &["table"]]);
    let t = ok(h.traverse(&trace))?;
    let got: Vec<String> = t.states.iter().map(|s| h.format_state(s)).collect();
    let expected = [
        "<M0, u0, true, []>",
        "<M1, u1, true, [<u0, u1, M0, M1, !rabbit, true>]>",
        "<M0, u1, true, []>",
        "<M0, u1, true, []>",
        "<M2, u1, true, [<u1, u3, M0, M2, true, true>]>",
        "<M0, u3, true, []>",
        "<M0, uA, true, []>",
    ];
    ensure!(got == expected, "states {got:?}");
    ensure!(t.verdict == Verdict::Accept, "verdict {:?}", t.verdict);
    Ok(format!("{} hierarchy states, accept", got.len()))
}

fn exit_condition() -> Outcome {
    let h = book("!rabbit");
    let x = ok(h.exit_condition(MachineId::Index(0), 0, &Dnf::True))?;
    let expected = ok(h.props().parse("!rabbit&sugarcane | rabbit"))?;
    ensure!(x == expected, "got {}", h.props().format(&x));
    Ok(h.props().format(&x))
}

fn flattening_golden() -> Outcome {
    let h = book("!rabbit");
    let f = ok(flatten(&h))?;
    let (s, e) = (f.root_machine().num_states(), f.root_machine().num_edges());
    ensure!((s, e) == (9, 9), "{s} states, {e} edges");
    ensure!(ok(f.height())? == 1, "flat height");
    let r = ok(check_equivalence(&h, &f, &TraceSource::Exhaustive { max_len: 6 }))?;
    let expected: u64 = (0..=6).map(|k| 16u64.pow(k)).sum();
    ensure!(r.traces_tested == expected, "{} traces tested", r.traces_tested);
    ensure!(r.is_equivalent(), "{} mismatches", r.mismatching_traces);
    Ok(format!("9 states, 9 edges, 0 mismatches on {expected} traces"))
}

fn size_family() -> Outcome {
    for h in 1..=6usize {
        let hrm = ok(make_parametric_hrm(h, "a", "b"))?;
        let f = ok(flatten(&hrm))?;
        let s = ok(analyze_size(&SizeProfile::uniform(h, 1, 3, 1)))?;
        let pow = 1u128 << h;
        let closed = (pow + 1, pow, 3 * h as u128, 2 * h as u128);
        ensure!((s.flat_states, s.flat_edges, s.hrm_states, s.hrm_edges) == closed, "h={h}: analysis {s:?}");
        let built = (
            f.root_machine().num_states() as u128,
            f.root_machine().num_edges() as u128,
            hrm.num_states() as u128,
            hrm.num_edges() as u128,
        );
        ensure!(built == closed, "h={h}: constructed {built:?} vs {closed:?}");
    }
    Ok("h = 1..6 agree with 2^h+1, 2^h, 3h, 2h".into())
}

fn flatten_property_suite() -> Outcome {
    let params = RandomHrmParams { props: 4, max_height: 3, max_states: 4, max_machines_per_level: 2 };
    let mut checked = 0;
    let mut deepest = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hrm(&mut rng, params).ok_or(format!("seed {seed}: no valid hierarchy"))?;
        let f = ok(flatten(&h))?;
        ensure!(f.validate().is_valid(), "seed {seed}: flat result invalid");
        let r = ok(check_equivalence(&h, &f, &TraceSource::Exhaustive { max_len: 6 }))?;
        ensure!(r.is_equivalent(), "seed {seed}: {:?}", r.mismatches.first());
        deepest = deepest.max(ok(h.height())?);
        checked += 1;
    }
    ensure!(deepest == 3, "deepest generated height {deepest}");
    Ok(format!("{checked} hierarchies, 0 mismatches"))
}

fn determinism_detection() -> Outcome {
    let h = book("true");
    let r = h.validate();
    let witness = r.violations.iter().find_map(|v| match v {
        Violation::Nondeterminism { machine, state, witness, .. } if machine == "M0" && state == "u0" => Some(*witness),
        _ => None,
    });
    let expected = ok(h.props().label(["sugarcane", "rabbit"]))?;
    ensure!(witness == Some(expected), "witness {witness:?}");
    ensure!(h.traverse(&[expected]).is_err(), "traversal should refuse the ambiguous label");
    Ok(format!("flagged at M0/u0 with {}", h.props().format_label(expected)))
}

fn formula_tree_goldens() -> Outcome {
    let p = ok(PropositionSet::new(["a", "b", "c", "d"]))?;
    let c = |s: &str| p.parse_conjunction(s).unwrap();
    let mut t = FormulaTree::new();
    for n in ["a", "b", "c", "d"] {
        t.on_label(ok(p.label([n]))?);
    }
    for f in ["a", "a&!b", "a&!b&!c", "a&!b&!c&!d", "a&!c"] {
        t.add_formula(c(f));
    }
    let parent = |t: &FormulaTree, f: &str| t.parent_of(&c(f));
    ensure!(t.root_children() == vec![c("a")], "first root children");
    for (child, par) in [("a&!b", "a"), ("a&!b&!c", "a&!b"), ("a&!b&!c&!d", "a&!b&!c"), ("a&!c", "a")] {
        ensure!(parent(&t, child) == Some(c(par)), "parent of {child} before the label");
    }
    t.on_label(ok(p.label(["a", "c"]))?);
    let mut roots = t.root_children();
    roots.sort();
    let mut expected: Vec<Conjunction> = vec![c("a"), c("a&!c")];
    expected.sort();
    ensure!(roots == expected, "root children after {{a, c}}");
    ensure!(t.check_invariants(), "tree invariants");
    Ok("root children {a} then {a, a&!c}".into())
}

fn induction_oracle() -> Outcome {
    let mut cases = 0;
    for f in induction_fixtures() {
        ensure!(f.task.props.len() <= 4 && f.task.kappa == 1 && f.task.num_states <= 4, "{} out of scope", f.name);
        for n in f.task.min_states()..=f.task.num_states {
            let task = f.task.clone().with_states(n);
            let expected = brute_force_sat(&task, f.rules);
            let got = ok(hrm::induction::induce_root(&task, Budget::default()))?;
            ensure!(got.outcome.is_sat() == expected, "{} at {n} states: search {} oracle {expected}", f.name, got.outcome.label());
            cases += 1;
        }
    }
    Ok(format!("{cases} fixture/state-count pairs agree"))
}

/// Labels a trace by the first prefix on which `truth` decides.
fn relabel(truth: &Hrm, labels: &[Label]) -> Option<LabelTrace> {
    for k in 1..=labels.len() {
        let kind = match truth.classify(&labels[..k]).ok()? {
            Verdict::Accept => TraceKind::Goal,
            Verdict::Reject => TraceKind::Deadend,
            Verdict::None => continue,
        };
        return LabelTrace::new(labels[..k].to_vec(), kind).ok();
    }
    LabelTrace::new(labels.to_vec(), TraceKind::Incomplete).ok()
}

fn sample_many(h: &Hrm, kind: TraceKind, count: usize, max_len: usize, rng: &mut ChaCha8Rng) -> Vec<LabelTrace> {
    let alpha = singleton_alphabet(h.props());
    let mut out = Vec::new();
    while out.len() < count {
        if let Some(t) = sample_trace(h, &alpha, kind, max_len, rng).unwrap() {
            out.push(t);
        }
    }
    out
}

fn induction_desk_scale() -> Outcome {
    let p = ok(PropositionSet::new(["iron", "table", "cow"]))?;
    let ex = examples(
        &p,
        &["iron|table", "|iron||table", "cow|iron|cow|table", "iron|iron|table"],
        &[],
        &["iron", "table", "table|iron", "cow", "iron|cow", ""],
    );
    let task = InductionTask::new("Bucket", p, ex).with_states(6);
    let r = ok(minimal_induce(&task, 2, Budget::default()))?;
    let bucket = r.outcome.solution().ok_or("Bucket: no solution")?;
    let m = bucket.root_machine();
    ensure!((m.num_states(), m.num_edges()) == (3, 2), "Bucket: {} states, {} edges", m.num_states(), m.num_edges());

    let truth = ok(ground_truth_hrm("Book", false))?;
    let callable = vec![ok(ground_truth_hrm("Paper", false))?, ok(ground_truth_hrm("Leather", false))?];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut ex = sample_many(&truth, TraceKind::Goal, 10, 12, &mut rng);
    ex.extend(sample_many(&truth, TraceKind::Incomplete, 10, 12, &mut rng));
    let deadline = Instant::now() + Duration::from_secs(600);
    let book = loop {
        ensure!(Instant::now() < deadline, "Book: no consistent root within the budget");
        let task = InductionTask::new("Book", truth.props().clone(), ex.clone()).with_callable(callable.clone()).with_states(8);
        let r = ok(minimal_induce(&task, 2, Budget::default()))?;
        let h = r.outcome.solution().ok_or(format!("Book: {}", r.outcome.label()))?.clone();
        let mut cex = Vec::new();
        for _ in 0..200 {
            for (src, kind) in [(&truth, TraceKind::Goal), (&h, TraceKind::Goal), (&truth, TraceKind::Incomplete)] {
                let Some(t) = sample_trace(src, &singleton_alphabet(src.props()), kind, 12, &mut rng).unwrap() else {
                    continue;
                };
                if let Some(t) = relabel(&truth, &t.labels).filter(|t| !check_validity(&h, t)) {
                    cex.push(t);
                }
            }
        }
        if cex.is_empty() {
            break h;
        }
        cex.sort_by_key(|t| t.labels.len());
        cex.dedup_by(|a, b| a.labels == b.labels);
        ex.extend(cex.into_iter().take(3));
    };
    let states = book.root_machine().num_states();
    ensure!(states == 5, "Book: {states} states");
    let mut held = ChaCha8Rng::seed_from_u64(1000);
    let mut held_out = sample_many(&truth, TraceKind::Goal, 10, 20, &mut held);
    held_out.extend(sample_many(&truth, TraceKind::Incomplete, 10, 20, &mut held));
    let failures = held_out.iter().filter(|t| !check_validity(&book, t)).count();
    ensure!(failures == 0, "Book: {failures}/20 held-out traces misclassified");
    Ok(format!("Bucket 3 states/2 edges; Book 5 states from {} traces, 20/20 held out", ex.len()))
}

fn train_until(name: &str, target: f64) -> Result<(usize, f64), String> {
    let spec = ok(task_spec(name, false))?;
    let world = ok(CraftWorld::new(CraftWorldConfig { layout: Layout::Op, seed: 0, ..Default::default() }))?;
    let mut env = ok(TaskEnv::new(Box::new(world), spec.reference.clone()))?;
    let mut agent = Agent::new(LearnParams::default(), 0);
    let mut episodes = 0;
    while episodes < 50_000 {
        for _ in 0..500 {
            ok(agent.run_episode(&mut env, &spec.reference, Mode::Train))?;
        }
        episodes += 500;
        let avg = ok(agent.evaluate(&mut env, &spec.reference, 100))?;
        if avg >= target {
            return Ok((episodes, avg));
        }
    }
    Err(format!("{name} below {target} after 50000 episodes"))
}

fn policy_learning() -> Outcome {
    let (eb, rb) = train_until("Bucket", 0.95)?;
    let (em, rm) = train_until("MilkBucket", 0.9)?;
    Ok(format!("Bucket {rb:.2} after {eb} episodes; MilkBucket {rm:.2} after {em} episodes"))
}

fn lhrm_smoke() -> Outcome {
    let env = EnvConfig::Craftworld(CraftWorldConfig { layout: Layout::Op, seed: 0, max_steps: 1000 });
    let mut cfg = LhrmConfig::new(&["Bucket", "Sugar", "MilkBucket"], env);
    cfg.max_episodes = 150_000;
    cfg.stop_on_convergence = true;
    let r = ok(lhrm_run(cfg.clone()))?;
    ensure!(r.halted.is_none(), "halted: {:?}", r.halted);
    ensure!(r.all_learned(), "not every task learned");
    let mut stored = 0;
    for e in &r.bank.entries {
        let h = ok(r.hrm(&e.name))?;
        ensure!(h.validate().is_valid(), "{} invalid", e.name);
        ensure!(e.examples.iter().all(|t| check_validity(&h, t)), "{} misclassifies a stored trace", e.name);
        stored += e.examples.len();
    }
    let unlock = r.levels.first().ok_or("level 2 never activated")?;
    let at_unlock: Vec<_> = r.evals.iter().filter(|e| e.episode == unlock.episode).collect();
    ensure!(
        at_unlock.len() == 2 && at_unlock.iter().all(|e| e.running > cfg.threshold),
        "level-1 returns at unlock {at_unlock:?}"
    );
    ensure!(
        r.episodes.iter().filter(|e| e.task == "MilkBucket").all(|e| e.episode > unlock.episode),
        "MilkBucket ran before level 2"
    );
    Ok(format!("3 valid hierarchies, level 2 at episode {}, {stored} stored traces", unlock.episode))
}

fn curriculum_arithmetic() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    let mut c = Curriculum::new(vec![1, 1, 2], 2, 0.9, 0.85);
    c.update(0, 0, 1.0);
    c.update(0, 0, 1.0);
    ensure!(close(c.returns[0][0], 0.19), "two updates give {}", c.returns[0][0]);
    c.returns = vec![vec![0.2, 0.6], vec![0.9, 0.5], vec![0.0, 0.0]];
    let p = c.task_probabilities();
    ensure!(close(p[0], 0.8 / 1.3) && close(p[1], 0.5 / 1.3) && p[2] == 0.0, "task probabilities {p:?}");
    let q = c.instance_probabilities(1);
    ensure!(close(q[0], 0.1 / 0.6) && close(q[1], 0.5 / 0.6), "instance probabilities {q:?}");
    ensure!(!c.maybe_advance(), "advanced below threshold");
    c.returns = vec![vec![0.86, 0.9], vec![0.95, 0.87], vec![0.0, 0.0]];
    ensure!(c.maybe_advance() && c.active_level == 2, "did not advance");
    let p = c.task_probabilities();
    ensure!(close(p.iter().sum(), 1.0) && close(p[2], 1.0 / 1.27), "after advance {p:?}");
    Ok("updates and probabilities exact; sums to 1".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, u64); 12] = [
        ("worked traversal", worked_traversal, 1),
        ("exit condition", exit_condition, 1),
        ("flattening golden", flattening_golden, 30),
        ("size family", size_family, 10),
        ("flatten property suite", flatten_property_suite, 300),
        ("determinism detection", determinism_detection, 1),
        ("formula tree goldens", formula_tree_goldens, 1),
        ("induction oracle", induction_oracle, 300),
        ("induction desk scale", induction_desk_scale, 600),
        ("policy learning", policy_learning, 900),
        ("lhrm smoke", lhrm_smoke, 1800),
        ("curriculum arithmetic", curriculum_arithmetic, 1),
    ];
    let mut failed = Vec::new();
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = t0.elapsed();
        let outcome = outcome.and_then(|d| {
            if elapsed > Duration::from_secs(*budget) {
                Err(format!("{d}; took {elapsed:.1?}, budget {budget} s"))
            } else {
                Ok(d)
            }
        });
        match &outcome {
            Ok(d) => println!("criterion {:>2} PASS {name}: {d} ({elapsed:.2?})", i + 1),
            Err(d) => {
                println!("criterion {:>2} FAIL {name}: {d} ({elapsed:.2?})", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("all {} criteria passed", criteria.len());
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
