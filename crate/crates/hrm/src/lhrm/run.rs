//! The interleaved learning loop.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{compress_trace, explore_episode, shortest, Curriculum, HrmBank, LhrmConfig};
use crate::envs::{task_spec, StepOutcome, TaskEnv};
use crate::induction::{check_validity, minimal_induce, Budget, InductionTask, Outcome};
use crate::logic::PropositionSet;
use crate::machines::{Hrm, LabelTrace, TraceKind, Verdict};
use crate::options::{Agent, EpisodeRecord, Mode};
use crate::{Error, Result};

/// Result of one root induction.
#[derive(Debug, Clone, Serialize)]
pub struct InductionEvent {
    pub episode: usize,
    pub task: String,
    pub num_states: usize,
    pub num_edges: usize,
    pub nodes: u64,
    pub elapsed_ms: u128,
    pub goal: usize,
    pub deadend: usize,
    pub incomplete: usize,
}

/// One greedy evaluation episode.
#[derive(Debug, Clone, Serialize)]
pub struct EvalRecord {
    pub episode: usize,
    pub task: String,
    pub instance: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    /// Running return after the update.
    pub running: f64,
}

/// Activation of a curriculum level.
#[derive(Debug, Clone, Serialize)]
pub struct LevelEvent {
    pub episode: usize,
    pub level: usize,
    /// Lowest running return of the previously active levels.
    pub min_return: f64,
}

/// Everything a run produced.
#[derive(Debug, Clone, Serialize)]
pub struct LhrmReport {
    pub config: LhrmConfig,
    pub bank: HrmBank,
    pub curriculum: Curriculum,
    pub episodes: Vec<EpisodeRecord>,
    pub evals: Vec<EvalRecord>,
    pub inductions: Vec<InductionEvent>,
    pub levels: Vec<LevelEvent>,
    /// Why the run stopped early, if it did.
    pub halted: Option<String>,
}

impl LhrmReport {
    /// Hierarchy of a task from the final bank.
    pub fn hrm(&self, task: &str) -> Result<Hrm> {
        let i = self.bank.index_of(task).ok_or_else(|| Error::UnknownTask(task.to_string()))?;
        self.bank.hrm(i)
    }

    /// Every task has a learned root.
    pub fn all_learned(&self) -> bool {
        self.bank.entries.iter().all(|e| e.learned)
    }
}

fn env_verdict(out: &StepOutcome) -> Verdict {
    match (out.terminal, out.goal) {
        (true, true) => Verdict::Accept,
        (true, false) => Verdict::Reject,
        _ => Verdict::None,
    }
}

fn kind_of(v: Verdict) -> TraceKind {
    match v {
        Verdict::Accept => TraceKind::Goal,
        Verdict::Reject => TraceKind::Deadend,
        Verdict::None => TraceKind::Incomplete,
    }
}

fn clashes(examples: &[LabelTrace], t: &LabelTrace) -> bool {
    examples.iter().any(|e| e.labels == t.labels && e.kind != t.kind)
}

/// Compressed form of a misclassified trace if it stays misclassified and
/// consistent with `examples`; the raw trace otherwise.
fn stored_form(hrm: &Hrm, raw: LabelTrace, examples: &[LabelTrace]) -> LabelTrace {
    let c = compress_trace(&raw);
    if c != raw && !check_validity(hrm, &c) && !clashes(examples, &c) {
        c
    } else {
        raw
    }
}

struct Runner {
    cfg: LhrmConfig,
    props: PropositionSet,
    envs: Vec<Vec<TaskEnv>>,
    bank: HrmBank,
    hrms: Vec<Hrm>,
    curriculum: Curriculum,
    agent: Agent,
    rng: ChaCha8Rng,
    /// Goal traces of tasks without a learned root.
    goals: Vec<Vec<LabelTrace>>,
    /// Counterexamples of each task other than dead ends.
    own: Vec<Vec<LabelTrace>>,
    /// Dead-end traces per instance, shared by all tasks.
    deadends: Vec<Vec<LabelTrace>>,
    report: Vec<InductionEvent>,
    episode: usize,
}

impl Runner {
    fn new(cfg: LhrmConfig) -> Result<Self> {
        cfg.check()?;
        let deadends = cfg.env.has_deadends();
        let mut specs = Vec::new();
        for name in &cfg.tasks {
            let s = task_spec(name, deadends)?;
            if s.domain != cfg.env.domain() {
                return Err(Error::Config(format!("task '{name}' does not belong to the {:?} domain", cfg.env.domain())));
            }
            specs.push(s);
        }
        let mut envs = Vec::new();
        for s in &specs {
            let row = (0..cfg.instances)
                .map(|j| TaskEnv::new(cfg.instance(j).build()?, s.reference.clone()))
                .collect::<Result<Vec<_>>>()?;
            envs.push(row);
        }
        let props = envs[0][0].props().clone();
        let tasks: Vec<(String, usize)> = specs.iter().map(|s| (s.name.clone(), s.level)).collect();
        let bank = HrmBank::new(&props, &tasks);
        let hrms = (0..tasks.len()).map(|i| bank.hrm(i)).collect::<Result<Vec<_>>>()?;
        let curriculum = Curriculum::new(specs.iter().map(|s| s.level).collect(), cfg.instances, cfg.beta, cfg.threshold);
        let n = tasks.len();
        Ok(Self {
            agent: Agent::new(cfg.learn, cfg.seed),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15)),
            deadends: vec![Vec::new(); cfg.instances],
            cfg,
            props,
            envs,
            bank,
            hrms,
            curriculum,
            goals: vec![Vec::new(); n],
            own: vec![Vec::new(); n],
            report: Vec::new(),
            episode: 0,
        })
    }

    fn add_deadend(&mut self, j: usize, t: LabelTrace) {
        if !self.deadends[j].contains(&t) {
            self.deadends[j].push(t);
        }
    }

    /// Stored examples of task `i` together with the dead-end pool.
    fn examples(&self, i: usize) -> Vec<LabelTrace> {
        let mut out: Vec<LabelTrace> = Vec::new();
        let mut seen = BTreeSet::new();
        for t in self.own[i].iter().chain(self.deadends.iter().flatten()) {
            if !clashes(&out, t) && seen.insert((t.labels.clone(), t.kind)) {
                out.push(t.clone());
            }
        }
        out
    }

    fn budget(&self) -> Budget {
        Budget {
            max_nodes: self.cfg.induction_nodes,
            time_limit: self.cfg.induction_seconds.map(Duration::from_secs_f64),
        }
    }

    /// Re-induces task `i`, then refreshes the tasks calling it. Returns a
    /// diagnostic when induction fails.
    fn induce(&mut self, i: usize) -> Result<Option<String>> {
        let entry = &self.bank.entries[i];
        let examples = self.examples(i);
        let callable = self.bank.callable_below(entry.level)?;
        let task = InductionTask::new(entry.name.clone(), self.props.clone(), examples.clone())
            .with_callable(callable)
            .with_states(self.cfg.max_states);
        let task = InductionTask { kappa: self.cfg.kappa, ..task };
        let start = if entry.learned { entry.root.states.len() } else { 0 };
        let res = minimal_induce(&task, start, self.budget())?;
        let h = match res.outcome {
            Outcome::Solution(h) => h,
            other => {
                return Ok(Some(format!(
                    "induction for '{}' at episode {} ended with {} (attempts {:?}, {} examples)",
                    entry.name,
                    self.episode,
                    other.label(),
                    res.stats.attempts,
                    examples.len()
                )))
            }
        };
        let name = entry.name.clone();
        let root = h.to_spec().machines.into_iter().find(|m| m.id == name).expect("induced root is present");
        let count = |k: TraceKind| examples.iter().filter(|t| t.kind == k).count();
        let event = InductionEvent {
            episode: self.episode,
            task: name.clone(),
            num_states: root.states.len(),
            num_edges: root.edges.len(),
            nodes: res.stats.nodes,
            elapsed_ms: res.stats.elapsed_ms,
            goal: count(TraceKind::Goal),
            deadend: count(TraceKind::Deadend),
            incomplete: count(TraceKind::Incomplete),
        };
        info!(
            "episode {}: learned '{}' with {} states and {} edges in {} ms",
            event.episode, event.task, event.num_states, event.num_edges, event.elapsed_ms
        );
        self.report.push(event);
        let e = &mut self.bank.entries[i];
        e.root = root;
        e.examples = examples;
        e.learned = true;
        self.hrms[i] = self.bank.hrm(i)?;
        self.curriculum.reset_task(i);
        self.agent.qs.forget_machine(&name);
        for k in self.bank.dependents(i) {
            self.hrms[k] = self.bank.hrm(k)?;
            self.agent.qs.forget_machine(&self.bank.entries[k].name);
            let stale = self.bank.entries[k].examples.iter().any(|t| !check_validity(&self.hrms[k], t));
            if stale {
                if let Some(d) = self.induce(k)? {
                    return Ok(Some(d));
                }
            }
        }
        Ok(None)
    }

    /// Episode of a task without a learned root.
    fn explore(&mut self, i: usize, j: usize) -> Result<(EpisodeRecord, Option<String>)> {
        let level = self.bank.entries[i].level;
        let options = self.bank.callable_below(level)?;
        let (trace, steps) = explore_episode(
            &mut self.agent,
            &mut self.envs[i][j],
            &options,
            self.cfg.exploration,
            self.cfg.option_steps,
            &mut self.rng,
        )?;
        let rec = self.record(i, j, &trace, steps);
        match trace.kind {
            TraceKind::Goal => self.goals[i].push(compress_trace(&trace)),
            TraceKind::Deadend => self.add_deadend(j, compress_trace(&trace)),
            TraceKind::Incomplete => {}
        }
        if self.goals[i].len() >= self.cfg.goal_traces_for(level) {
            let first = shortest(&self.goals[i], self.cfg.rho_s);
            self.own[i].extend(first);
            self.goals[i].clear();
            return Ok((rec, self.induce(i)?));
        }
        Ok((rec, None))
    }

    /// Training episode of a task with a learned root.
    fn train(&mut self, i: usize, j: usize) -> Result<(EpisodeRecord, Option<String>)> {
        let hrm = self.hrms[i].clone();
        let mut t = 0;
        let mut mismatch: Option<(usize, Verdict)> = None;
        let stats = self.agent.run_episode_observed(&mut self.envs[i][j], &hrm, Mode::Train, |hs, _, out| {
            t += 1;
            let truth = env_verdict(out);
            if mismatch.is_none() && hrm.verdict(hs) != truth {
                mismatch = Some((t, truth));
            }
        })?;
        let rec = self.record(i, j, &stats.trace, stats.steps);
        let Some((len, truth)) = mismatch else {
            return Ok((rec, None));
        };
        let raw = LabelTrace { labels: stats.trace.labels[..len].to_vec(), kind: kind_of(truth) };
        let all = self.examples(i);
        let stored = stored_form(&hrm, raw, &all);
        if stored.kind == TraceKind::Deadend {
            self.add_deadend(j, stored);
        } else {
            self.own[i].push(stored);
        }
        Ok((rec, self.induce(i)?))
    }

    fn record(&self, i: usize, j: usize, trace: &LabelTrace, steps: usize) -> EpisodeRecord {
        EpisodeRecord {
            episode: self.episode,
            task: self.bank.entries[i].name.clone(),
            instance: j,
            ret: if trace.kind == TraceKind::Goal { 1.0 } else { 0.0 },
            steps,
            verdict: trace.kind.expected_verdict(),
        }
    }

    fn converged(&self) -> bool {
        let c = &self.curriculum;
        self.bank.entries.iter().all(|e| e.learned)
            && (0..c.levels.len()).all(|i| c.eligible(i))
            && c.min_eligible_return() > c.threshold
    }

    fn evaluate(&mut self, evals: &mut Vec<EvalRecord>) -> Result<()> {
        for i in 0..self.bank.entries.len() {
            if !self.curriculum.eligible(i) || !self.bank.entries[i].learned {
                continue;
            }
            for j in 0..self.cfg.instances {
                let ret = self.agent.run_episode(&mut self.envs[i][j], &self.hrms[i], Mode::Eval)?.ret;
                self.curriculum.update(i, j, ret);
                evals.push(EvalRecord {
                    episode: self.episode,
                    task: self.bank.entries[i].name.clone(),
                    instance: j,
                    ret,
                    running: self.curriculum.returns[i][j],
                });
            }
        }
        Ok(())
    }
}

/// Runs the interleaved loop for `cfg.max_episodes` episodes or until an
/// induction fails.
pub fn lhrm_run(cfg: LhrmConfig) -> Result<LhrmReport> {
    let started = Instant::now();
    let mut r = Runner::new(cfg.clone())?;
    let mut episodes = Vec::new();
    let mut evals = Vec::new();
    let mut levels = Vec::new();
    let mut halted = None;
    while r.episode < cfg.max_episodes {
        r.episode += 1;
        let (i, j) = r.curriculum.sample(&mut r.rng);
        let (rec, failure) = if r.bank.entries[i].learned { r.train(i, j)? } else { r.explore(i, j)? };
        episodes.push(rec);
        if let Some(d) = failure {
            halted = Some(d);
            break;
        }
        if r.episode % cfg.eval_every == 0 {
            r.evaluate(&mut evals)?;
            let min_return = r.curriculum.min_eligible_return();
            if r.curriculum.maybe_advance() {
                info!("episode {}: level {} active", r.episode, r.curriculum.active_level);
                levels.push(LevelEvent { episode: r.episode, level: r.curriculum.active_level, min_return });
            } else if cfg.stop_on_convergence && r.converged() {
                info!("episode {}: converged", r.episode);
                break;
            }
        }
    }
    info!("{} episodes in {:.1} s", r.episode, started.elapsed().as_secs_f64());
    Ok(LhrmReport {
        config: cfg,
        bank: r.bank,
        curriculum: r.curriculum,
        episodes,
        evals,
        inductions: r.report,
        levels,
        halted,
    })
}
