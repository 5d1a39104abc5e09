//! Labeled environments, the task catalog, and task termination.
//!
//! # Environments
//!
//! An [`Environment`] exposes discrete actions and, after every step, an
//! [`Observation`] made of a hashable state key and the label of
//! propositions observed at that step. Two domains are provided:
//! [`CraftWorld`], a grid where the agent moves forward or rotates and
//! observes the object it stands on, and [`WaterWorld`], a box of moving
//! coloured balls where the agent steers by impulses.
//!
//! # Tasks
//!
//! A task is identified by name in the catalog of [`tasks`]. Its reference
//! hierarchy decides termination: a [`TaskEnv`] feeds every label to a
//! [`TaskMonitor`], which ends the episode once the hierarchy accepts (goal)
//! or rejects (dead end). The label observed on reset is not part of the
//! trace.
//!
//! # Rollout log
//!
//! [`RolloutStep`] records are written as JSON lines
//! `{"t", "action", "label", "terminal", "goal", "reward"}`.

mod craftworld;
pub mod tasks;
mod waterworld;

pub use craftworld::{CraftWorld, CraftWorldConfig, Layout, CRAFTWORLD_OBJECTS, LAVA};
pub use tasks::{
    add_deadends, catalog, ground_truth_hrm, sample_trace, singleton_alphabet, task_names, task_spec,
    Domain, TaskSpec,
};
pub use waterworld::{Ball, WaterWorld, WaterWorldConfig, DEADEND_COLOR, WATERWORLD_COLORS};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{Label, PropositionSet};
use crate::machines::{HierarchyState, Hrm, LabelTrace, Symbol, TraceKind, Verdict};

/// What the agent perceives after a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Observation {
    /// Hash of the environment state, used as the tabular state key.
    pub key: u64,
    pub label: Label,
}

/// A labeled environment with discrete actions.
pub trait Environment {
    fn props(&self) -> &PropositionSet;
    fn num_actions(&self) -> usize;
    /// Restores the start configuration of the instance.
    fn reset(&mut self) -> Observation;
    fn step(&mut self, action: usize) -> Observation;
    /// Default episode length cap.
    fn max_steps(&self) -> usize;
}

/// Environment configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "lowercase")]
pub enum EnvConfig {
    Craftworld(CraftWorldConfig),
    Waterworld(WaterWorldConfig),
}

impl EnvConfig {
    pub fn domain(&self) -> Domain {
        match self {
            EnvConfig::Craftworld(_) => Domain::CraftWorld,
            EnvConfig::Waterworld(_) => Domain::WaterWorld,
        }
    }

    /// Whether the environment has a dead-end proposition.
    pub fn has_deadends(&self) -> bool {
        match self {
            EnvConfig::Craftworld(c) => c.layout.has_lava(),
            EnvConfig::Waterworld(c) => c.deadends,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            EnvConfig::Craftworld(c) => c.seed,
            EnvConfig::Waterworld(c) => c.seed,
        }
    }

    /// Same configuration with another seed.
    pub fn with_seed(&self, seed: u64) -> EnvConfig {
        let mut c = self.clone();
        match &mut c {
            EnvConfig::Craftworld(x) => x.seed = seed,
            EnvConfig::Waterworld(x) => x.seed = seed,
        }
        c
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvConfig::Craftworld(c) => Box::new(CraftWorld::new(c.clone())?),
            EnvConfig::Waterworld(c) => Box::new(WaterWorld::new(c.clone())?),
        })
    }
}

/// Termination flags and reward after one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Termination {
    pub terminal: bool,
    pub goal: bool,
}

/// Tracks a reference hierarchy along an episode's labels.
#[derive(Debug, Clone)]
pub struct TaskMonitor {
    hrm: Hrm,
    state: HierarchyState,
    verdict: Verdict,
}

impl TaskMonitor {
    /// Fails if the hierarchy does not validate.
    pub fn new(hrm: Hrm) -> Result<Self> {
        let report = hrm.validate();
        if let Some(v) = report.violations.first() {
            return Err(Error::InvalidMachine(v.to_string()));
        }
        let state = hrm.initial_state();
        Ok(Self { hrm, state, verdict: Verdict::None })
    }

    pub fn hrm(&self) -> &Hrm {
        &self.hrm
    }

    pub fn reset(&mut self) {
        self.state = self.hrm.initial_state();
        self.verdict = Verdict::None;
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    /// Advances on a label; returns the flags and the reward, which is 1 only
    /// on the step that reaches the goal.
    pub fn observe(&mut self, label: Label) -> Result<(Termination, f64)> {
        if self.verdict != Verdict::None {
            return Ok((flags(self.verdict), 0.0));
        }
        self.state = self.hrm.step(&self.state, Symbol::Label(label))?;
        self.verdict = self.hrm.verdict(&self.state);
        let reward = if self.verdict == Verdict::Accept { 1.0 } else { 0.0 };
        Ok((flags(self.verdict), reward))
    }
}

fn flags(v: Verdict) -> Termination {
    match v {
        Verdict::Accept => Termination { terminal: true, goal: true },
        Verdict::Reject => Termination { terminal: true, goal: false },
        Verdict::None => Termination { terminal: false, goal: false },
    }
}

/// Flags a reference hierarchy assigns to a label prefix.
pub fn task_monitor(hrm: &Hrm, labels: &[Label]) -> Result<Termination> {
    Ok(flags(hrm.classify(labels)?))
}

/// Result of [`TaskEnv::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub terminal: bool,
    pub goal: bool,
    pub reward: f64,
    /// Episode stopped by the step cap without terminating.
    pub truncated: bool,
}

/// An environment instance paired with a task's termination monitor.
pub struct TaskEnv {
    env: Box<dyn Environment>,
    monitor: TaskMonitor,
    max_steps: usize,
    t: usize,
    labels: Vec<Label>,
}

impl TaskEnv {
    /// Fails if the hierarchy is invalid or its propositions differ from the environment's.
    pub fn new(env: Box<dyn Environment>, reference: Hrm) -> Result<Self> {
        if reference.props() != env.props() {
            return Err(Error::Config(format!(
                "task propositions {:?} differ from environment propositions {:?}",
                reference.props().names(),
                env.props().names()
            )));
        }
        let max_steps = env.max_steps();
        Ok(Self { env, monitor: TaskMonitor::new(reference)?, max_steps, t: 0, labels: Vec::new() })
    }

    pub fn set_max_steps(&mut self, n: usize) {
        self.max_steps = n;
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn props(&self) -> &PropositionSet {
        self.env.props()
    }

    pub fn num_actions(&self) -> usize {
        self.env.num_actions()
    }

    pub fn reference(&self) -> &Hrm {
        self.monitor.hrm()
    }

    /// Labels observed since the last reset.
    pub fn trace(&self) -> &[Label] {
        &self.labels
    }

    /// Episode trace classified by the termination flags.
    pub fn classified_trace(&self) -> LabelTrace {
        let kind = match self.monitor.verdict() {
            Verdict::Accept => TraceKind::Goal,
            Verdict::Reject => TraceKind::Deadend,
            Verdict::None => TraceKind::Incomplete,
        };
        LabelTrace { labels: self.labels.clone(), kind }
    }

    pub fn reset(&mut self) -> Observation {
        self.monitor.reset();
        self.t = 0;
        self.labels.clear();
        self.env.reset()
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let obs = self.env.step(action);
        self.t += 1;
        self.labels.push(obs.label);
        let (flags, reward) = self.monitor.observe(obs.label)?;
        Ok(StepOutcome {
            obs,
            terminal: flags.terminal,
            goal: flags.goal,
            reward,
            truncated: !flags.terminal && self.t >= self.max_steps,
        })
    }
}

/// One line of a rollout log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutStep {
    pub t: usize,
    pub action: usize,
    pub label: Vec<String>,
    pub terminal: bool,
    pub goal: bool,
    pub reward: f64,
}

/// Runs one episode with uniformly random actions.
pub fn random_rollout<R: Rng>(env: &mut TaskEnv, rng: &mut R) -> Result<Vec<RolloutStep>> {
    env.reset();
    let actions: Vec<usize> = (0..env.num_actions()).collect();
    let mut log = Vec::new();
    for t in 1..=env.max_steps() {
        let a = *actions.choose(rng).expect("environments have actions");
        let out = env.step(a)?;
        log.push(RolloutStep {
            t,
            action: a,
            label: env.props().label_names(out.obs.label).into_iter().map(String::from).collect(),
            terminal: out.terminal,
            goal: out.goal,
            reward: out.reward,
        });
        if out.terminal {
            break;
        }
    }
    Ok(log)
}

/// 64-bit FNV-1a over a sequence of words.
pub(crate) fn fnv1a(words: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for w in words {
        for b in w.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
